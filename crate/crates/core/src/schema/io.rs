//! Text formats for schema manifests, tuple streams and entity censuses.
//!
//! A data directory holds `schema.txt`, an optional `entities.tsv` census
//! (`type \t id`, registered before any tuple so ordinals survive splits) and
//! one `<relation>.tsv` tuple stream per relation.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{
    Database, DatabaseBuilder, LabeledCell, Observation, Registry, RelationDecl, SchemaManifest,
    TupleRecord,
};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const MANIFEST_FILE: &str = "schema.txt";
pub const CENSUS_FILE: &str = "entities.tsv";

/// Parses a schema manifest: `type <name>` and
/// `relation <name> <row_type> <col_type> [fully_observed|positives_only]`.
pub fn parse_manifest(text: &str, path: &str) -> Result<SchemaManifest> {
    let mut manifest = SchemaManifest::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["type", name] => manifest.types.push(name.to_string()),
            ["relation", name, row, col, rest @ ..] => {
                let observation = match rest {
                    [] => Observation::Explicit,
                    [flag] if *flag == "fully_observed" || *flag == "positives_only" => {
                        Observation::from_keyword(flag).unwrap()
                    }
                    _ => {
                        return Err(Error::parse(
                            path,
                            idx + 1,
                            "expected at most one of fully_observed|positives_only",
                        ))
                    }
                };
                manifest.relations.push(RelationDecl {
                    name: name.to_string(),
                    row_type: row.to_string(),
                    col_type: col.to_string(),
                    observation,
                });
            }
            _ => return Err(Error::parse(path, idx + 1, format!("bad declaration `{line}`"))),
        }
    }
    Registry::from_manifest(&manifest)?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &SchemaManifest, w: &mut dyn Write) -> Result<()> {
    for ty in &manifest.types {
        writeln!(w, "type {ty}")?;
    }
    for r in &manifest.relations {
        match r.observation {
            Observation::Explicit => writeln!(w, "relation {} {} {}", r.name, r.row_type, r.col_type)?,
            obs => writeln!(
                w,
                "relation {} {} {} {}",
                r.name,
                r.row_type,
                r.col_type,
                obs.keyword()
            )?,
        }
    }
    Ok(())
}

fn parse_label(s: &str, path: &str, line: usize) -> Result<u8> {
    match s.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::parse(path, line, format!("label must be 0 or 1, got `{other}`"))),
    }
}

/// Reads a tuple stream. The 3-column form (label implied 1) is accepted
/// here; the builder rejects it later for relations that are not
/// positives-only.
pub fn read_tuple_stream<R: BufRead>(reader: R, path: &str) -> Result<Vec<TupleRecord>> {
    read_tuple_stream_with(reader, path, |_| true)
}

pub(crate) fn read_tuple_stream_with<R, F>(
    reader: R,
    path: &str,
    allows_implied_label: F,
) -> Result<Vec<TupleRecord>>
where
    R: BufRead,
    F: Fn(&str) -> bool,
{
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let record = match fields.as_slice() {
            [rel, e1, e2, label] => TupleRecord::new(rel, e1, e2, parse_label(label, path, idx + 1)?),
            [rel, e1, e2] if allows_implied_label(rel) => TupleRecord::new(rel, e1, e2, 1),
            [_, _, _] => {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    "3-column tuples are only allowed for positives-only relations",
                ))
            }
            _ => return Err(Error::parse(path, idx + 1, "expected 3 or 4 tab-separated columns")),
        };
        out.push(record);
    }
    Ok(out)
}

pub fn write_tuple_stream<'a, I>(records: I, w: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = &'a TupleRecord>,
{
    for r in records {
        writeln!(w, "{}\t{}\t{}\t{}", r.relation, r.e1, r.e2, r.label)?;
    }
    Ok(())
}

pub fn write_labeled_cells(registry: &Registry, cells: &[LabeledCell], w: &mut dyn Write) -> Result<()> {
    let records: Vec<TupleRecord> = cells.iter().map(|c| registry.cell_record(c)).collect();
    write_tuple_stream(&records, w)
}

pub fn read_census<R: BufRead>(reader: R, path: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (ty, id) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, idx + 1, "expected `type \\t id`"))?;
        out.push((ty.to_string(), id.to_string()));
    }
    Ok(out)
}

pub fn write_census(registry: &Registry, w: &mut dyn Write) -> Result<()> {
    for e in registry.all_entities() {
        writeln!(w, "{}\t{}", registry.type_name(e.ty), registry.entity_id(e))?;
    }
    Ok(())
}

/// Loads `<dir>/entities.tsv` (if present) and `<dir>/<relation>.tsv` for
/// every declared relation (missing files mean empty relations).
pub fn load_database_dir(dir: &Path, manifest: &SchemaManifest) -> Result<Database> {
    let mut builder = DatabaseBuilder::new(manifest)?;
    let census = dir.join(CENSUS_FILE);
    if census.exists() {
        let path = census.display().to_string();
        for (ty, id) in read_census(BufReader::new(File::open(&census)?), &path)? {
            builder.register_entity(&ty, &id)?;
        }
    }
    let positives_only: Vec<&str> = manifest
        .relations
        .iter()
        .filter(|r| r.observation == Observation::PositivesOnly)
        .map(|r| r.name.as_str())
        .collect();
    for decl in &manifest.relations {
        let file = dir.join(format!("{}.tsv", decl.name));
        if !file.exists() {
            continue;
        }
        let path = file.display().to_string();
        let records = read_tuple_stream_with(BufReader::new(File::open(&file)?), &path, |rel| {
            positives_only.contains(&rel)
        })?;
        for record in &records {
            builder.add(record)?;
        }
    }
    Ok(builder.build())
}

/// Writes manifest, census and one tuple stream per relation into `dir`.
pub fn write_database_dir(db: &Database, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let reg = db.registry();
    write_atomic(&dir.join(MANIFEST_FILE), |w| write_manifest(&reg.manifest(), w))?;
    write_atomic(&dir.join(CENSUS_FILE), |w| write_census(reg, w))?;
    for (id, rel) in reg.relations().iter().enumerate() {
        let cells: Vec<LabeledCell> = db.cells(id).collect();
        write_atomic(&dir.join(format!("{}.tsv", rel.name)), |w| {
            write_labeled_cells(reg, &cells, w)
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MANIFEST: &str = "# demo\ntype user\ntype item\ntype word\n\
        relation R user item\nrelation UW user word positives_only\n";

    #[test]
    fn manifest_parses_and_roundtrips() {
        let m = parse_manifest(MANIFEST, "m").unwrap();
        assert_eq!(m.types.len(), 3);
        assert_eq!(m.relations[1].observation, Observation::PositivesOnly);
        let mut buf = Vec::new();
        write_manifest(&m, &mut buf).unwrap();
        let again = parse_manifest(std::str::from_utf8(&buf).unwrap(), "m2").unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn manifest_rejects_both_flags_and_unknown_types() {
        let both = "type a\nrelation X a a fully_observed positives_only\n";
        assert!(parse_manifest(both, "m").is_err());
        assert!(parse_manifest("relation X a b\n", "m").is_err());
        assert!(parse_manifest("type a\ntype a\n", "m").is_err());
    }

    #[test]
    fn tuple_stream_forms() {
        let text = "R\tu1\tb1\t1\nUW\tu1\ttaco\n\nR\tu1\tb2\t0\n";
        let recs = read_tuple_stream(text.as_bytes(), "t").unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1], TupleRecord::new("UW", "u1", "taco", 1));
        assert!(read_tuple_stream("R\tu\tb\t2\n".as_bytes(), "t").is_err());
        assert!(read_tuple_stream("R\tu\n".as_bytes(), "t").is_err());
    }

    #[test]
    fn implied_label_rejected_for_explicit_relation_in_dir() {
        let dir = tempfile::tempdir().unwrap();
        let m = parse_manifest(MANIFEST, "m").unwrap();
        fs::write(dir.path().join("R.tsv"), "R\tu1\tb1\n").unwrap();
        assert!(load_database_dir(dir.path(), &m).is_err());
        fs::write(dir.path().join("R.tsv"), "R\tu1\tb1\t1\n").unwrap();
        fs::write(dir.path().join("UW.tsv"), "UW\tu1\ttaco\n").unwrap();
        let db = load_database_dir(dir.path(), &m).unwrap();
        assert_eq!(db.total_tuples(), 2);
    }

    #[test]
    fn directory_roundtrip_preserves_ordinals() {
        let m = parse_manifest(MANIFEST, "m").unwrap();
        let mut b = DatabaseBuilder::new(&m).unwrap();
        b.register_entity("item", "lonely").unwrap();
        b.add(&TupleRecord::new("R", "u1", "b1", 1)).unwrap();
        b.add(&TupleRecord::new("UW", "u2", "taco", 1)).unwrap();
        let db = b.build();
        let dir = tempfile::tempdir().unwrap();
        write_database_dir(&db, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let back = load_database_dir(dir.path(), &parse_manifest(&text, "m").unwrap()).unwrap();
        let item = back.registry().type_id("item").unwrap();
        assert_eq!(back.registry().entity_ids(item)[0], "lonely");
        assert_eq!(back.total_tuples(), 2);
        assert_eq!(back.registry().total_entities(), db.registry().total_entities());
    }
}
