//! Set files, function CSVs and report writers.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use slnq_core::bogolyubov::GroupSet;
use slnq_core::fqlin::MatFq;
use slnq_core::groups::GroupTable;
use slnq_core::scheme::{Domain, FnTable};
use slnq_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputKind {
    Set,
    Function,
}

pub enum Parsed {
    Set(GroupSet),
    Function(FnTable),
}

/// Where a function file lives: the group (ordinals) or a scheme of `len` points.
pub enum Target<'a> {
    Group(&'a GroupTable),
    Scheme { tag: Domain, len: usize },
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_inputs(path: &Path, kind: InputKind, target: Target<'_>) -> Result<Parsed> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    match (kind, target) {
        (InputKind::Set, Target::Group(g)) => parse_set(&text, g).map(Parsed::Set),
        (InputKind::Set, Target::Scheme { .. }) => Err(Error::Invalid("set files describe subsets of a group".into())),
        (InputKind::Function, Target::Group(g)) => parse_function(&text, g.tag(), g.order()).map(Parsed::Function),
        (InputKind::Function, Target::Scheme { tag, len }) => parse_function(&text, tag, len).map(Parsed::Function),
    }
}

/// one matrix per line, comma-separated row-major entries
pub fn parse_set(text: &str, g: &GroupTable) -> Result<GroupSet> {
    let n = g.n;
    let q = g.q();
    let mut members = Vec::new();
    for (line, l) in content_lines(text) {
        let entries = l
            .split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<usize>()
                    .ok()
                    .filter(|&v| v < q)
                    .map(|v| v as u8)
                    .ok_or_else(|| Error::Parse { line, msg: format!("'{t}' is not an integer in [0,{q})") })
            })
            .collect::<Result<Vec<u8>>>()?;
        if entries.len() != n * n {
            return Err(Error::Parse { line, msg: format!("expected {} entries for a {n}x{n} matrix, found {}", n * n, entries.len()) });
        }
        let m = MatFq::from_vec(n, n, entries)?;
        match g.ordinal(&m) {
            Some(o) => members.push(o),
            None => {
                let det = m.det(&g.field)?;
                return Err(Error::Parse { line, msg: format!("matrix is not in {} (det = {det})", g.name()) });
            }
        }
    }
    GroupSet::new(g, members)
}

/// `index,re[,im]` rows; absent indices are zero; an optional header row is skipped
pub fn parse_function(text: &str, tag: Domain, len: usize) -> Result<FnTable> {
    let mut values = vec![Complex64::new(0.0, 0.0); len];
    let mut seen = vec![false; len];
    for (k, (line, l)) in content_lines(text).enumerate() {
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if k == 0 && fields[0].parse::<usize>().is_err() && fields[0].chars().any(|c| c.is_ascii_alphabetic()) {
            continue;
        }
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Parse { line, msg: format!("expected index,re,im but found {} fields", fields.len()) });
        }
        let index: usize = fields[0].parse().map_err(|_| Error::Parse { line, msg: format!("bad index '{}'", fields[0]) })?;
        if index >= len {
            return Err(Error::Parse { line, msg: format!("index {index} out of range (domain has {len} points)") });
        }
        if seen[index] {
            return Err(Error::Parse { line, msg: format!("index {index} given twice") });
        }
        seen[index] = true;
        let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse { line, msg: format!("bad number '{s}'") });
        let re = num(fields[1])?;
        let im = if fields.len() == 3 { num(fields[2])? } else { 0.0 };
        values[index] = Complex64::new(re, im);
    }
    Ok(FnTable::new(tag, values))
}

pub fn function_csv(f: &FnTable) -> String {
    let mut s = String::from("index,re,im\n");
    for (i, v) in f.values.iter().enumerate() {
        s.push_str(&format!("{i},{:e},{:e}\n", v.re, v.im));
    }
    s
}

pub fn set_lines(g: &GroupTable, set: &GroupSet) -> String {
    let mut s = String::new();
    for &o in &set.elems {
        let m = g.mat(o);
        let row: Vec<String> = (0..g.n).flat_map(|r| m.row(r).to_vec()).map(|v| v.to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Output directory plus the list of files written, for the manifest.
pub struct Artifacts {
    pub dir: PathBuf,
    pub written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
        body.push('\n');
        self.text(name, &body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use slnq_core::gf::FieldCtx;
    use slnq_core::groups::GroupKind;
    use std::sync::Arc;

    fn sl22() -> GroupTable {
        GroupTable::enumerate(GroupKind::SL, 2, Arc::new(FieldCtx::new(2).unwrap())).unwrap()
    }

    #[test]
    fn set_files() {
        let g = sl22();
        assert!(parse_set("", &g).unwrap().is_empty());
        let s = parse_set("# identity\n1,0,0,1\n", &g).unwrap();
        assert_eq!(s.elems, vec![g.identity()]);
        let e = parse_set("1,0,0,1\n1,1,1,1\n", &g).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        assert!(matches!(parse_set("1,0,2,1", &g), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_set("1,0,0", &g), Err(Error::Parse { line: 1, .. })));
        assert_eq!(parse_set(&set_lines(&g, &s), &g).unwrap(), s);
    }

    #[test]
    fn function_files() {
        let g = sl22();
        let f = parse_function("index,re,im\n0,1.5,0\n3,0,-2\n", g.tag(), 6).unwrap();
        assert_eq!(f.values[0], Complex64::new(1.5, 0.0));
        assert_eq!(f.values[3], Complex64::new(0.0, -2.0));
        assert_eq!(f.values[1], Complex64::new(0.0, 0.0));
        assert!(matches!(parse_function("6,1,0", g.tag(), 6), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_function("0,1\n0,2", g.tag(), 6), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_function("0,x,0", g.tag(), 6), Err(Error::Parse { .. })));
        let back = parse_function(&function_csv(&f), g.tag(), 6).unwrap();
        assert_eq!(back, f);
    }
}
