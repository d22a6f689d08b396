//! Versioned text model format.
//!
//! ```text
//! relfactor-model v1 k=<k> biases=<0|1> [precision=f32]
//! types <n>
//! type <name>                                       (n lines)
//! relations <m>
//! relation <name> <row_type> <col_type> <observation>  (m lines)
//! entities <N>
//! <type>:<id> \t b=<bias> \t <c1> <c2> ... <ck>     (N lines, type-major)
//! offset <relation> <value>                         (m lines, biases=1 only)
//! end
//! ```
//!
//! Reals are written with 17 significant digits, which round-trips every
//! `f64` exactly. The optional `precision=f32` mode rounds to `f32` first.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use super::{Biases, EmbeddingStore};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::schema::{Observation, Registry, RelationDecl};

pub const MODEL_MAGIC: &str = "relfactor-model";
const VERSION: &str = "v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Full,
    /// Parameters rounded to 32-bit floats; not bit-exact.
    Compact,
}

fn fmt_real(x: f64, precision: Precision) -> String {
    match precision {
        Precision::Full => format!("{x:.16e}"),
        Precision::Compact => format!("{:.8e}", x as f32),
    }
}

pub fn save_model(store: &EmbeddingStore, w: &mut dyn Write, precision: Precision) -> Result<()> {
    let reg = store.registry();
    write!(
        w,
        "{MODEL_MAGIC} {VERSION} k={} biases={}",
        store.k(),
        u8::from(store.biases_enabled())
    )?;
    if precision == Precision::Compact {
        write!(w, " precision=f32")?;
    }
    writeln!(w)?;
    writeln!(w, "types {}", reg.type_count())?;
    for name in reg.type_names() {
        writeln!(w, "type {name}")?;
    }
    writeln!(w, "relations {}", reg.relations().len())?;
    for r in reg.relations() {
        writeln!(
            w,
            "relation {} {} {} {}",
            r.name,
            reg.type_name(r.row_type),
            reg.type_name(r.col_type),
            r.observation.keyword()
        )?;
    }
    writeln!(w, "entities {}", reg.total_entities())?;
    for e in reg.all_entities() {
        let bias = fmt_real(store.entity_bias(e), precision);
        let coords: Vec<String> = store.vector(e).iter().map(|&x| fmt_real(x, precision)).collect();
        writeln!(w, "{}\tb={bias}\t{}", reg.qualified_name(e), coords.join(" "))?;
    }
    if let Some(b) = store.biases() {
        for (r, value) in reg.relations().iter().zip(&b.relation) {
            writeln!(w, "offset {} {}", r.name, fmt_real(*value, precision))?;
        }
    }
    writeln!(w, "end")?;
    Ok(())
}

pub fn save_model_file(store: &EmbeddingStore, path: &Path, precision: Precision) -> Result<()> {
    write_atomic(path, |w| save_model(store, w, precision))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(Error::Format(format!("truncated file at line {}", self.line_no))),
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Format(format!("line {}: {msg}", self.line_no))
    }

    /// Reads `<keyword> <count>`.
    fn count(&mut self, keyword: &str) -> Result<usize> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((kw, n)) if kw == keyword => n.parse().map_err(|_| self.err("bad count")),
            _ => Err(self.err(format!("expected `{keyword} <n>`"))),
        }
    }
}

fn parse_real(s: &str, lines: &Lines<impl BufRead>) -> Result<f64> {
    let x: f64 = s.parse().map_err(|_| lines.err(format!("bad number `{s}`")))?;
    if !x.is_finite() {
        return Err(lines.err("non-finite parameter"));
    }
    Ok(x)
}

pub fn load_model<R: BufRead>(reader: R) -> Result<EmbeddingStore> {
    let mut lines = Lines {
        inner: reader.lines(),
        line_no: 0,
    };
    let header = lines.next_line()?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.first() != Some(&MODEL_MAGIC) {
        return Err(lines.err("not a relfactor model file"));
    }
    if fields.get(1) != Some(&VERSION) {
        return Err(lines.err(format!(
            "unsupported version `{}` (expected {VERSION})",
            fields.get(1).unwrap_or(&"")
        )));
    }
    let mut k = None;
    let mut biases = None;
    for f in &fields[2..] {
        match f.split_once('=') {
            Some(("k", v)) => k = v.parse::<usize>().ok(),
            Some(("biases", "0")) => biases = Some(false),
            Some(("biases", "1")) => biases = Some(true),
            Some(("precision", "f32" | "f64")) => {}
            _ => return Err(lines.err(format!("bad header field `{f}`"))),
        }
    }
    let k = k.filter(|&k| k > 0).ok_or_else(|| lines.err("missing or invalid k"))?;
    let biases = biases.ok_or_else(|| lines.err("missing biases flag"))?;

    let mut reg = Registry::default();
    for _ in 0..lines.count("types")? {
        let line = lines.next_line()?;
        let name = line.strip_prefix("type ").ok_or_else(|| lines.err("expected `type <name>`"))?;
        reg.add_type(name)?;
    }
    let n_rel = lines.count("relations")?;
    for _ in 0..n_rel {
        let line = lines.next_line()?;
        let f: Vec<&str> = line.split_whitespace().collect();
        let decl = match f.as_slice() {
            ["relation", name, row, col, obs] => RelationDecl {
                name: name.to_string(),
                row_type: row.to_string(),
                col_type: col.to_string(),
                observation: Observation::from_keyword(obs)
                    .ok_or_else(|| lines.err(format!("bad observation `{obs}`")))?,
            },
            _ => return Err(lines.err("expected relation declaration")),
        };
        reg.add_relation(&decl)?;
    }

    let n_ent = lines.count("entities")?;
    let mut rows = Vec::with_capacity(n_ent);
    for _ in 0..n_ent {
        let line = lines.next_line()?;
        let mut parts = line.split('\t');
        let (name, bias, coords) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(b), Some(c), None) => (n, b, c),
            _ => return Err(lines.err("expected `type:id \\t b=<bias> \\t coords`")),
        };
        let (ty, id) = name.split_once(':').ok_or_else(|| lines.err("expected type:id"))?;
        let ty = reg.type_id(ty)?;
        let before = reg.entity_count(ty);
        let entity = reg.intern(ty, id)?;
        if reg.entity_count(ty) == before {
            return Err(lines.err(format!("duplicate entity `{name}`")));
        }
        let bias = bias.strip_prefix("b=").ok_or_else(|| lines.err("expected b=<bias>"))?;
        let bias = parse_real(bias, &lines)?;
        let coords = coords
            .split(' ')
            .map(|c| parse_real(c, &lines))
            .collect::<Result<Vec<f64>>>()?;
        if coords.len() != k {
            return Err(lines.err(format!("expected {k} coordinates")));
        }
        rows.push((entity, bias, coords));
    }

    // Place rows type-major regardless of the order they were listed in.
    let offsets = reg.type_offsets();
    let mut vectors = vec![0.0; n_ent * k];
    let mut entity_bias = vec![0.0; n_ent];
    for (e, bias, coords) in rows {
        let i = offsets[e.ty] + e.ordinal as usize;
        vectors[i * k..(i + 1) * k].copy_from_slice(&coords);
        entity_bias[i] = bias;
    }

    let bias_table = if biases {
        let mut relation = vec![0.0; n_rel];
        let mut seen = vec![false; n_rel];
        for _ in 0..n_rel {
            let line = lines.next_line()?;
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                ["offset", name, value] => {
                    let id = reg.relation_id(name)?;
                    if std::mem::replace(&mut seen[id], true) {
                        return Err(lines.err(format!("duplicate offset for `{name}`")));
                    }
                    relation[id] = parse_real(value, &lines)?;
                }
                _ => return Err(lines.err("expected `offset <relation> <value>`")),
            }
        }
        Some(Biases {
            entity: entity_bias,
            relation,
        })
    } else {
        None
    };
    if lines.next_line()? != "end" {
        return Err(lines.err("expected `end`"));
    }
    EmbeddingStore::from_parts(Arc::new(reg), k, vectors, bias_table)
}

pub fn load_model_file(path: &Path) -> Result<EmbeddingStore> {
    load_model(BufReader::new(File::open(path)?))
}
