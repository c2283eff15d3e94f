//! Tab-separated relation files.
//!
//! The first line names the attributes; every following non-empty line holds
//! one tuple as decimal values. Lines starting with `#` are ignored. Rows are
//! written in canonical order, so equal relations produce identical bytes.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use super::relation::{Catalog, JoinQuery, Relation, Value};
use crate::error::{Error, Result};

pub fn read_relation(input: impl BufRead, catalog: &mut Catalog) -> Result<Relation> {
    let mut scheme = None;
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        match &scheme {
            None => scheme = Some(fields.iter().map(|n| catalog.intern(n)).collect::<Vec<_>>()),
            Some(s) => {
                if fields.len() != s.len() {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("expected {} fields, found {}", s.len(), fields.len()),
                    });
                }
                let row = fields
                    .iter()
                    .map(|f| {
                        f.parse::<Value>().map_err(|e| Error::Parse {
                            line: i + 1,
                            msg: format!("{f:?}: {e}"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(row);
            }
        }
    }
    let scheme = scheme.ok_or(Error::Parse {
        line: 0,
        msg: "missing header line".into(),
    })?;
    Relation::new(scheme, rows)
}

pub fn write_relation(out: &mut impl Write, r: &Relation, catalog: &Catalog) -> io::Result<()> {
    writeln!(out, "{}", catalog.names_of(r.scheme()).join("\t"))?;
    let mut line = String::new();
    for row in r.rows() {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push('\t');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_relation_file(path: &Path, catalog: &mut Catalog) -> Result<Relation> {
    let f = fs::File::open(path)?;
    read_relation(io::BufReader::new(f), catalog)
}

pub fn write_relation_file(path: &Path, r: &Relation, catalog: &Catalog) -> Result<()> {
    let mut w = io::BufWriter::new(fs::File::create(path)?);
    write_relation(&mut w, r, catalog)?;
    w.flush()?;
    Ok(())
}

/// Reads every `*.tsv` file of `dir`, in file-name order, as one query.
pub fn read_query_dir(dir: &Path, catalog: &mut Catalog) -> Result<JoinQuery> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
        .collect();
    paths.sort();
    let rels = paths
        .iter()
        .map(|p| read_relation_file(p, catalog))
        .collect::<Result<Vec<_>>>()?;
    JoinQuery::new(rels)
}

/// Writes one `<names>.tsv` file per relation, e.g. `A_B.tsv`.
pub fn write_query_dir(dir: &Path, q: &JoinQuery, catalog: &Catalog) -> Result<()> {
    fs::create_dir_all(dir)?;
    for r in q.relations() {
        let name = catalog.names_of(r.scheme()).join("_");
        write_relation_file(&dir.join(format!("{name}.tsv")), r, catalog)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cat = Catalog::letters(3);
        let r = Relation::binary(
            cat.lookup("B").unwrap(),
            cat.lookup("A").unwrap(),
            [(5, 1), (2, 3)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_relation(&mut buf, &r, &cat).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "A\tB\n1\t5\n3\t2\n");
        let back = read_relation(&buf[..], &mut cat).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn reports_bad_lines() {
        let mut cat = Catalog::new();
        let err = read_relation(&b"A\tB\n1\t2\n3\n"[..], &mut cat).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = read_relation(&b"A\tB\n1\tx\n"[..], &mut cat).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(read_relation(&b""[..], &mut cat).is_err());
    }
}
