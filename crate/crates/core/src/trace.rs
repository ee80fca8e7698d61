//! Plain-text channel trace files.
//!
//! ```text
//! # free-form comment lines (ignored on import)
//! chanpred-trace 1
//! blocks 4
//! subcarriers 2
//! antennas 2
//! domain subcarrier
//! provenance true
//! records
//! 0 0 0 0.5 -0.25
//! ...
//! ```
//!
//! After `records` there is exactly one line `n l m re im` per entry, in
//! block, subcarrier, antenna order (zero-based indices). Floats are written
//! in shortest round-trip form, so export followed by import is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{ChannelTensor, Domain, Provenance};

pub const MAGIC: &str = "chanpred-trace";
pub const VERSION: u32 = 1;

/// Render `tensor` in trace format, prefixed by `comments` as `#` lines.
pub fn render_trace(tensor: &ChannelTensor, comments: &[String]) -> String {
    let mut s = String::with_capacity(tensor.values().len() * 48 + 256);
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(s, "# {line}");
        }
    }
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let _ = writeln!(s, "blocks {}", tensor.blocks());
    let _ = writeln!(s, "subcarriers {}", tensor.subcarriers());
    let _ = writeln!(s, "antennas {}", tensor.antennas());
    let _ = writeln!(s, "domain {}", tensor.domain.as_str());
    let _ = writeln!(s, "provenance {}", tensor.provenance.as_str());
    s.push_str("records\n");
    for n in 0..tensor.blocks() {
        for l in 0..tensor.subcarriers() {
            for m in 0..tensor.antennas() {
                let v = tensor.get(n, l, m);
                let _ = writeln!(s, "{n} {l} {m} {:?} {:?}", v.re, v.im);
            }
        }
    }
    s
}

pub fn export_trace(tensor: &ChannelTensor, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_trace(tensor, comments)).map_err(|e| Error::io(path, e))
}

pub fn import_trace(path: impl AsRef<Path>) -> Result<ChannelTensor> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text, path)
}

struct Header {
    blocks: usize,
    subcarriers: usize,
    antennas: usize,
    domain: Domain,
    provenance: Provenance,
}

/// Parse trace text; `origin` is only used in error messages.
pub fn parse_trace(text: &str, origin: &Path) -> Result<ChannelTensor> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let mut next_kv = |key: &str| -> Result<(usize, String)> {
        let (no, line) = lines
            .next()
            .ok_or_else(|| err(0, format!("unexpected end of file, expected `{key}`")))?;
        let mut it = line.split_whitespace();
        match (it.next(), it.next(), it.next()) {
            (Some(k), Some(v), None) if k == key => Ok((no, v.to_string())),
            _ => Err(err(no, format!("malformed header: expected `{key} <value>`, got `{line}`"))),
        }
    };
    let parse_dim = |no: usize, key: &str, v: &str| -> Result<usize> {
        match v.parse::<usize>() {
            Ok(d) if d > 0 => Ok(d),
            _ => Err(err(no, format!("malformed header: `{key}` must be a positive integer, got `{v}`"))),
        }
    };

    let (no, version) = next_kv(MAGIC)?;
    if version != VERSION.to_string() {
        return Err(err(no, format!("unsupported trace version `{version}`")));
    }
    let (no, v) = next_kv("blocks")?;
    let blocks = parse_dim(no, "blocks", &v)?;
    let (no, v) = next_kv("subcarriers")?;
    let subcarriers = parse_dim(no, "subcarriers", &v)?;
    let (no, v) = next_kv("antennas")?;
    let antennas = parse_dim(no, "antennas", &v)?;
    let (no, v) = next_kv("domain")?;
    let domain = Domain::parse(&v).ok_or_else(|| err(no, format!("malformed header: unknown domain `{v}`")))?;
    let (no, v) = next_kv("provenance")?;
    let provenance =
        Provenance::parse(&v).ok_or_else(|| err(no, format!("malformed header: unknown provenance `{v}`")))?;
    let header = Header {
        blocks,
        subcarriers,
        antennas,
        domain,
        provenance,
    };

    match lines.next() {
        Some((_, "records")) => {}
        Some((no, l)) => return Err(err(no, format!("malformed header: expected `records`, got `{l}`"))),
        None => return Err(err(0, "unexpected end of file, expected `records`".into())),
    }

    let total = header.blocks * header.subcarriers * header.antennas;
    let mut values = Vec::with_capacity(total);
    let mut last_line = 0;
    for (no, line) in lines {
        last_line = no;
        let idx = values.len();
        if idx >= total {
            return Err(err(
                no,
                format!(
                    "dimension mismatch: extra record beyond declared N={} L={} M={}",
                    header.blocks, header.subcarriers, header.antennas
                ),
            ));
        }
        let expect = (
            idx / (header.subcarriers * header.antennas),
            (idx / header.antennas) % header.subcarriers,
            idx % header.antennas,
        );
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(no, format!("malformed record: expected `n l m re im`, got `{line}`")));
        }
        let parse_idx = |s: &str| s.parse::<usize>().map_err(|_| err(no, format!("malformed record index `{s}`")));
        let got = (parse_idx(fields[0])?, parse_idx(fields[1])?, parse_idx(fields[2])?);
        if got != expect {
            return Err(err(
                no,
                format!(
                    "dimension mismatch: record (n={}, l={}, m={}) where (n={}, l={}, m={}) was expected for L={} M={}",
                    got.0, got.1, got.2, expect.0, expect.1, expect.2, header.subcarriers, header.antennas
                ),
            ));
        }
        let parse_f = |s: &str| -> Result<f64> {
            let x = s.parse::<f64>().map_err(|_| err(no, format!("malformed float `{s}`")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(err(no, format!("non-finite value `{s}` in record (n={}, l={}, m={})", got.0, got.1, got.2)))
            }
        };
        values.push(Complex64::new(parse_f(fields[3])?, parse_f(fields[4])?));
    }
    if values.len() != total {
        return Err(err(
            last_line,
            format!(
                "dimension mismatch: {} records for declared N={} L={} M={} ({} expected)",
                values.len(),
                header.blocks,
                header.subcarriers,
                header.antennas,
                total
            ),
        ));
    }
    ChannelTensor::new(
        header.blocks,
        header.subcarriers,
        header.antennas,
        values,
        header.domain,
        header.provenance,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn parse(s: &str) -> Result<ChannelTensor> {
        parse_trace(s, &PathBuf::from("mem"))
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let vals: Vec<Complex64> = (0..12)
            .map(|i| Complex64::new((i as f64).sqrt() / 3.0, -1e-300 * i as f64 + 0.1f64.powi(i)))
            .collect();
        let t = ChannelTensor::new(3, 2, 2, vals, Domain::Antenna, Provenance::Predicted).unwrap();
        let back = parse(&render_trace(&t, &["hello".into()])).unwrap();
        assert_eq!(back, t);
        for (a, b) in back.values().iter().zip(t.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn missing_subcarrier_record_is_dimension_mismatch() {
        // declares L=2 but block 0 only has subcarrier 0
        let s = "chanpred-trace 1\nblocks 2\nsubcarriers 2\nantennas 1\ndomain subcarrier\nprovenance true\nrecords\n\
                 0 0 0 1 0\n1 0 0 1 0\n1 1 0 1 0\n";
        match parse(s) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 9);
                assert!(msg.contains("dimension mismatch"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn short_file_is_dimension_mismatch() {
        let s = "chanpred-trace 1\nblocks 1\nsubcarriers 2\nantennas 1\ndomain subcarrier\nprovenance true\nrecords\n0 0 0 1 0\n";
        let e = parse(s).unwrap_err().to_string();
        assert!(e.contains("dimension mismatch"), "{e}");
    }

    #[test]
    fn malformed_header_and_nonfinite() {
        assert!(parse("chanpred-trace 1\nblocks x\n").unwrap_err().to_string().contains("malformed header"));
        assert!(parse("trace 1\n").unwrap_err().to_string().contains("malformed header"));
        let s = "chanpred-trace 1\nblocks 1\nsubcarriers 1\nantennas 1\ndomain subcarrier\nprovenance true\nrecords\n0 0 0 NaN 0\n";
        let e = parse(s).unwrap_err().to_string();
        assert!(e.contains("non-finite") && e.contains(":8:"), "{e}");
    }
}
