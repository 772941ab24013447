use alloc::vec::Vec;

use super::leafset::{LeafSet, LeafSpan};
use super::model::{ModelSpace, SpaceKind};

/// One cube `Q^k_alpha` of a Christ decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristCube {
    pub level: usize,
    pub index: usize,
    pub span: LeafSpan,
    /// Leaf playing the role of the center `z^k_alpha`.
    pub center: usize,
    /// Distance from the center to the nearest leaf outside the cube.
    pub inner_radius: f64,
    pub diameter: f64,
}

/// Cubes of every level `0..=N` with the recorded constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristDecomposition {
    pub levels: Vec<Vec<ChristCube>>,
    pub delta: f64,
    pub c3: f64,
    pub c4: f64,
}

/// Outcome of the exhaustive property check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChristReport {
    /// Each level covers every leaf.
    pub covering: bool,
    /// Cubes of different levels are nested or disjoint.
    pub nesting: bool,
    /// Every cube has exactly one ancestor on each coarser level.
    pub unique_parent: bool,
    pub diameter_bound: bool,
    pub inner_ball: bool,
}

impl ChristReport {
    pub fn all(&self) -> bool {
        self.covering && self.nesting && self.unique_parent && self.diameter_bound && self.inner_ball
    }
}

fn span_diameter(space: &ModelSpace, span: LeafSpan) -> f64 {
    if span.len() < 2 {
        0.0
    } else {
        space.distance(span.start, span.end - 1)
    }
}

/// Cubes are the subtree spans of the underlying tree.
///
/// On tree boundaries `C3 = delta` and `C4 = 1` hold exactly; for the interval
/// and Cantor models both constants are measured from the cubes.
pub fn christ_decomposition(space: &ModelSpace) -> ChristDecomposition {
    let tree = space.tree();
    let n = tree.leaf_count();
    let delta = tree.delta();
    let mut levels = Vec::with_capacity(tree.depth() + 1);
    for k in 0..=tree.depth() {
        let size = tree.level_size(k);
        let cubes: Vec<ChristCube> = (0..n / size)
            .map(|index| {
                let span = LeafSpan::new(index * size, (index + 1) * size);
                let center = span.start + span.len() / 2;
                let inner_radius = space
                    .distance_to_complement(center, &LeafSet::from_span(n, span))
                    .unwrap_or(space.diameter());
                ChristCube { level: k, index, span, center, inner_radius, diameter: span_diameter(space, span) }
            })
            .collect();
        levels.push(cubes);
    }
    let (c3, c4) = if space.kind() == SpaceKind::TreeBoundary {
        (delta, 1.0)
    } else {
        let mut c3 = f64::INFINITY;
        let mut c4 = 0.0f64;
        for cubes in &levels {
            for q in cubes {
                let scale = tree.delta_pow(q.level);
                if q.level > 0 {
                    c3 = c3.min(q.inner_radius / scale);
                }
                c4 = c4.max(q.diameter / scale);
            }
        }
        (c3, c4)
    };
    ChristDecomposition { levels, delta, c3, c4 }
}

impl ChristDecomposition {
    pub fn cube_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Checks the five defining properties over all cubes and cube pairs.
    pub fn check(&self, space: &ModelSpace) -> ChristReport {
        let n = space.leaf_count();
        let mut report = ChristReport {
            covering: true,
            nesting: true,
            unique_parent: true,
            diameter_bound: true,
            inner_ball: true,
        };
        for cubes in &self.levels {
            let mut seen = alloc::vec![0u32; n];
            for q in cubes {
                for l in q.span.iter() {
                    seen[l] += 1;
                }
            }
            if seen.iter().any(|&c| c != 1) {
                report.covering = false;
            }
        }
        for (k, coarse) in self.levels.iter().enumerate() {
            for fine in &self.levels[k..] {
                for q in fine {
                    let mut parents = 0;
                    for p in coarse {
                        if p.span.contains_span(&q.span) {
                            parents += 1;
                        } else if p.span.intersects(&q.span) {
                            report.nesting = false;
                        }
                    }
                    if parents != 1 {
                        report.unique_parent = false;
                    }
                }
            }
        }
        for cubes in &self.levels {
            for q in cubes {
                let scale = space.tree().delta_pow(q.level);
                if q.diameter > self.c4 * scale * (1.0 + 1e-12) {
                    report.diameter_bound = false;
                }
                let ball = space.ball(q.center, self.c3 * scale * (1.0 - 1e-12));
                if !q.span.contains_span(&ball) {
                    report.inner_ball = false;
                }
            }
        }
        report
    }
}
