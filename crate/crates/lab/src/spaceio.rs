//! Flat text format for spaces: a header line `kind b N delta Q` followed by
//! one leaf weight per line.

use std::fmt::Write as _;
use std::path::Path;

use potlab_core::space::{MassProfile, ModelSpace, SpaceKind, TreeSpace};

use crate::error::{LabError, LabResult};

pub fn to_text(space: &ModelSpace) -> String {
    let tree = space.tree();
    let mut out = format!(
        "{} {} {} {} {}\n",
        space.kind().name(),
        tree.branching(),
        tree.depth(),
        tree.delta(),
        space.dimension()
    );
    for w in space.weights() {
        writeln!(out, "{w}").expect("string write");
    }
    out
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::SpaceFormat(msg.into())
}

pub fn from_text(text: &str) -> LabResult<ModelSpace> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(bad("header must read: kind b N delta Q"));
    }
    let kind = SpaceKind::parse(fields[0]).ok_or_else(|| bad(format!("unknown kind {:?}", fields[0])))?;
    let b: usize = fields[1].parse().map_err(|_| bad("b is not an integer"))?;
    let n: usize = fields[2].parse().map_err(|_| bad("N is not an integer"))?;
    let delta: f64 = fields[3].parse().map_err(|_| bad("delta is not a number"))?;
    let q: f64 = fields[4].parse().map_err(|_| bad("Q is not a number"))?;
    let weights = lines
        .enumerate()
        .map(|(i, l)| l.trim().parse::<f64>().map_err(|_| bad(format!("weight line {} is not a number", i + 2))))
        .collect::<LabResult<Vec<f64>>>()?;
    let profile = MassProfile::Custom(weights);
    let space = match kind {
        SpaceKind::TreeBoundary => ModelSpace::tree_boundary(TreeSpace::new(b, n, delta, profile)?),
        _ => {
            let s = ModelSpace::build(kind, b, n, delta, profile)?;
            if (s.delta() - delta).abs() > 1e-12 * delta {
                return Err(bad(format!("delta {delta} does not match the {} model", kind.name())));
            }
            s
        }
    };
    Ok(space.with_dimension(q)?)
}

pub fn read(path: &Path) -> LabResult<ModelSpace> {
    let text = std::fs::read_to_string(path)?;
    from_text(&text)
}
