//! Text checkpoints. Values are stored as raw f64 bit patterns in hex, so a
//! save/load round trip is bit exact. The header pins the motif set hash and
//! the architecture; loading against a different motif set is refused.

use crate::error::{Error, Result};
use crate::hash::fnv1a64_hex;
use crate::motif::Motif;
use crate::nn::model::Model;
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &str = "motifconv checkpoint v1";
const VALUES_PER_LINE: usize = 64;

/// Stable digest of an ordered motif set. A checkpoint only loads against
/// the exact set it was trained with.
pub fn motif_set_hash(motifs: &[Motif]) -> String {
    let joined = motifs.iter().map(|m| m.signature()).collect::<Vec<_>>().join("\n");
    fnv1a64_hex(joined.as_bytes())
}

fn corrupt(path: &Path, msg: impl Into<String>) -> Error {
    Error::Checkpoint(format!("{}: {}", path.display(), msg.into()))
}

pub fn save_checkpoint(path: &Path, model: &Model, motif_hash: &str) -> Result<()> {
    let first = &model.layers[0];
    let input_dim = first.units[0].w[0].rows();
    let filters = first.units[0].w[0].cols();
    let classes = model.classifier_w.cols();
    let role_counts: Vec<usize> = first.units.iter().map(|u| u.w.len() - 1).collect();

    let mut text = String::new();
    let _ = writeln!(text, "{MAGIC}");
    let _ = writeln!(text, "motifs {motif_hash}");
    let _ = writeln!(
        text,
        "shape input={input_dim} filters={filters} classes={classes} layers={}",
        model.layers.len()
    );
    let roles: Vec<String> = role_counts.iter().map(|k| k.to_string()).collect();
    let _ = writeln!(text, "roles {}", roles.join(" "));
    for (name, values) in model.param_groups() {
        let _ = writeln!(text, "group {name} {}", values.len());
        for chunk in values.chunks(VALUES_PER_LINE) {
            let words: Vec<String> = chunk.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
            let _ = writeln!(text, "{}", words.join(" "));
        }
    }
    let _ = writeln!(text, "end");
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path, expected_motif_hash: &str) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(corrupt(path, "not a motifconv checkpoint"));
    }
    let hash_line = lines.next().unwrap_or("");
    let stored_hash = hash_line
        .strip_prefix("motifs ")
        .ok_or_else(|| corrupt(path, "missing motif hash"))?;
    if stored_hash != expected_motif_hash {
        return Err(Error::Checkpoint(format!(
            "{}: trained on a different motif set (stored {stored_hash}, current {expected_motif_hash})",
            path.display()
        )));
    }
    let shape_line = lines
        .next()
        .and_then(|l| l.strip_prefix("shape "))
        .ok_or_else(|| corrupt(path, "missing shape line"))?;
    let mut input_dim = None;
    let mut filters = None;
    let mut classes = None;
    let mut layer_count = None;
    for field in shape_line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| corrupt(path, format!("bad shape field {field}")))?;
        let value: usize = value
            .parse()
            .map_err(|_| corrupt(path, format!("bad shape value {field}")))?;
        match key {
            "input" => input_dim = Some(value),
            "filters" => filters = Some(value),
            "classes" => classes = Some(value),
            "layers" => layer_count = Some(value),
            other => return Err(corrupt(path, format!("unknown shape key {other}"))),
        }
    }
    let (input_dim, filters, classes, layer_count) =
        match (input_dim, filters, classes, layer_count) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => return Err(corrupt(path, "incomplete shape line")),
        };
    let roles_line = lines
        .next()
        .and_then(|l| l.strip_prefix("roles "))
        .ok_or_else(|| corrupt(path, "missing roles line"))?;
    let role_counts: Vec<usize> = roles_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| corrupt(path, format!("bad role count {t}"))))
        .collect::<Result<_>>()?;
    if role_counts.is_empty() {
        return Err(corrupt(path, "empty roles line"));
    }

    let mut model = Model::zeros(input_dim, filters, classes, layer_count, &role_counts);
    let mut groups = model.param_groups_mut();
    let mut gi = 0;
    loop {
        let line = lines.next().ok_or_else(|| corrupt(path, "truncated file"))?;
        if line == "end" {
            if gi != groups.len() {
                return Err(corrupt(path, format!("only {gi} of {} groups present", groups.len())));
            }
            break;
        }
        let rest = line
            .strip_prefix("group ")
            .ok_or_else(|| corrupt(path, format!("expected group header, got {line:?}")))?;
        let (name, len_str) = rest
            .rsplit_once(' ')
            .ok_or_else(|| corrupt(path, "malformed group header"))?;
        let len: usize = len_str
            .parse()
            .map_err(|_| corrupt(path, format!("bad group length {len_str}")))?;
        if gi >= groups.len() {
            return Err(corrupt(path, format!("unexpected extra group {name}")));
        }
        let (expected_name, slot) = &mut groups[gi];
        if name != expected_name {
            return Err(corrupt(
                path,
                format!("group {gi} is {name}, expected {expected_name}"),
            ));
        }
        if len != slot.len() {
            return Err(corrupt(
                path,
                format!("group {name} has {len} values, expected {}", slot.len()),
            ));
        }
        let mut filled = 0;
        while filled < len {
            let line = lines
                .next()
                .ok_or_else(|| corrupt(path, format!("group {name} truncated")))?;
            for word in line.split_whitespace() {
                if filled >= len {
                    return Err(corrupt(path, format!("group {name} has extra values")));
                }
                let bits = u64::from_str_radix(word, 16)
                    .map_err(|_| corrupt(path, format!("bad value {word:?} in group {name}")))?;
                slot[filled] = f64::from_bits(bits);
                filled += 1;
            }
        }
        gi += 1;
    }
    drop(groups);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_model() -> Model {
        let mut model = Model::init(5, 3, 4, 2, &[1, 2], 99).unwrap();
        // Values hex encoding must not normalize away.
        let mut groups = model.param_groups_mut();
        groups[0].1[0] = -0.0;
        groups[0].1[1] = f64::MIN_POSITIVE / 8.0;
        groups[1].1[0] = 1e300;
        model
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = sample_model();
        let hash = motif_set_hash(&[Motif::edge_any(), Motif::wedge_any()]);
        save_checkpoint(&path, &model, &hash).unwrap();
        let loaded = load_checkpoint(&path, &hash).unwrap();
        for ((an, a), (bn, b)) in model.param_groups().iter().zip(&loaded.param_groups()) {
            assert_eq!(an, bn);
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits(), "group {an}");
            }
        }
    }

    #[test]
    fn wrong_motif_set_is_refused() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = sample_model();
        let hash = motif_set_hash(&[Motif::edge_any()]);
        save_checkpoint(&path, &model, &hash).unwrap();
        let other = motif_set_hash(&[Motif::triangle_any()]);
        let err = load_checkpoint(&path, &other).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "{err}");
        assert!(err.to_string().contains("different motif set"));
    }

    #[test]
    fn motif_hash_is_order_sensitive_and_stable() {
        let a = motif_set_hash(&[Motif::edge_any(), Motif::wedge_any()]);
        let b = motif_set_hash(&[Motif::edge_any(), Motif::wedge_any()]);
        let c = motif_set_hash(&[Motif::wedge_any(), Motif::edge_any()]);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn truncated_and_tampered_files_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = sample_model();
        let hash = motif_set_hash(&[Motif::edge_any()]);
        save_checkpoint(&path, &model, &hash).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();

        let cut: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        std::fs::write(&path, cut).unwrap();
        assert!(load_checkpoint(&path, &hash).is_err());

        let renamed = text.replacen("group layer1.motif1.w0", "group layer1.motif9.w0", 1);
        std::fs::write(&path, renamed).unwrap();
        let err = load_checkpoint(&path, &hash).unwrap_err();
        assert!(err.to_string().contains("expected layer1.motif1.w0"), "{err}");

        std::fs::write(&path, "not a checkpoint\n").unwrap();
        assert!(load_checkpoint(&path, &hash).is_err());
    }
}
