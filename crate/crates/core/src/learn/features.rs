//! Head features: each word's representation is extended with the
//! (soft) representation of its heads under a structure vector `ẑ`.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::structures::ArcIndexer;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadMode {
    /// `Σ_i ẑ(i → j) h_i`, for single-headed structures.
    Sum,
    /// The sum divided by the number of active heads (at least one), for
    /// graphs where a word may have several heads or none.
    Average,
}

/// Labeled coordinates of a graph structure plus role embeddings. When
/// present, the role embeddings of each word's incoming arcs are pooled
/// like the head representations and appended as a third block.
#[derive(Debug, Clone, Copy)]
pub struct RoleInput<'a> {
    /// `ẑ` over labeled arcs, `arc · labels + label` layout.
    pub labeled: &'a [f64],
    /// `labels × role_dim`.
    pub embeddings: &'a Array2<f64>,
}

/// Gradients produced by [`head_feature_backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeadFeatureGrads {
    pub h: Array2<f64>,
    /// With respect to the unlabeled coordinates of `ẑ`.
    pub z: Vec<f64>,
    pub labeled: Option<Vec<f64>>,
    pub roles: Option<Array2<f64>>,
}

fn check(h: &Array2<f64>, z: &[f64], indexer: &ArcIndexer, roles: Option<RoleInput>) -> Result<()> {
    crate::error::check_len(indexer.node_count(), h.nrows())?;
    crate::error::check_len(indexer.len(), z.len())?;
    if let Some(r) = roles {
        let labels = r.embeddings.nrows();
        if labels == 0 {
            return Err(Error::invalid("role embeddings need at least one label"));
        }
        crate::error::check_len(indexer.len() * labels, r.labeled.len())?;
    }
    Ok(())
}

fn normalizer(mode: HeadMode, mass: f64) -> f64 {
    match mode {
        HeadMode::Sum => 1.0,
        HeadMode::Average => mass.max(1.0),
    }
}

/// Builds `h̃_j = [h_j; Σ_i ẑ(i → j) h_i / c_j (; pooled roles)]` for words
/// `j = 1..=n`, where `h` has one row per node (row 0 is the root) and
/// `c_j` is 1 in sum mode and `max(Σ_i ẑ(i → j), 1)` in average mode.
pub fn head_feature_concat(
    h: &Array2<f64>,
    z: &[f64],
    indexer: &ArcIndexer,
    mode: HeadMode,
    roles: Option<RoleInput>,
) -> Result<Array2<f64>> {
    check(h, z, indexer, roles)?;
    let n = indexer.n();
    let dim = h.ncols();
    let role_dim = roles.map_or(0, |r| r.embeddings.ncols());
    let mut out = Array2::zeros((n, 2 * dim + role_dim));
    for m in 1..=n {
        let mut row = out.row_mut(m - 1);
        row.slice_mut(s![..dim]).assign(&h.row(m));
        let mass: f64 = indexer.incoming(m).map(|k| z[k]).sum();
        let c = normalizer(mode, mass);
        for k in indexer.incoming(m) {
            if z[k] == 0.0 {
                continue;
            }
            let (head, _) = indexer.arc(k).expect("in range");
            let mut block = row.slice_mut(s![dim..2 * dim]);
            block.scaled_add(z[k] / c, &h.row(head));
        }
        if let Some(r) = roles {
            let labels = r.embeddings.nrows();
            let mut block = row.slice_mut(s![2 * dim..]);
            for k in indexer.incoming(m) {
                for l in 0..labels {
                    let w = r.labeled[k * labels + l];
                    if w != 0.0 {
                        block.scaled_add(w / c, &r.embeddings.row(l));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`head_feature_concat`] given `d_out`.
///
/// In average mode the normalizer is treated as `max(mass, 1)` with the
/// `mass ≥ 1` branch taken at exactly 1.
pub fn head_feature_backward(
    h: &Array2<f64>,
    z: &[f64],
    indexer: &ArcIndexer,
    mode: HeadMode,
    roles: Option<RoleInput>,
    d_out: &Array2<f64>,
) -> Result<HeadFeatureGrads> {
    check(h, z, indexer, roles)?;
    let n = indexer.n();
    let dim = h.ncols();
    let role_dim = roles.map_or(0, |r| r.embeddings.ncols());
    if d_out.dim() != (n, 2 * dim + role_dim) {
        return Err(Error::invalid("head feature gradient has the wrong shape"));
    }
    let mut d_h = Array2::zeros(h.raw_dim());
    let mut d_z = vec![0.0; z.len()];
    let mut d_labeled = roles.map(|r| vec![0.0; r.labeled.len()]);
    let mut d_roles = roles.map(|r| Array2::zeros(r.embeddings.raw_dim()));

    for m in 1..=n {
        let g = d_out.row(m - 1);
        let mut direct = d_h.row_mut(m);
        direct += &g.slice(s![..dim]);
        let g_head = g.slice(s![dim..2 * dim]);
        let g_role = g.slice(s![2 * dim..]);

        let mass: f64 = indexer.incoming(m).map(|k| z[k]).sum();
        let c = normalizer(mode, mass);
        let averaging = mode == HeadMode::Average && mass >= 1.0;

        // the pooled blocks, needed for the normalizer's derivative
        let mut head_block = ndarray::Array1::zeros(dim);
        for k in indexer.incoming(m) {
            let (head, _) = indexer.arc(k).expect("in range");
            head_block.scaled_add(z[k] / c, &h.row(head));
        }
        let role_dot = match roles {
            Some(r) if averaging => {
                let labels = r.embeddings.nrows();
                let mut pooled = ndarray::Array1::zeros(role_dim);
                for k in indexer.incoming(m) {
                    for l in 0..labels {
                        pooled.scaled_add(r.labeled[k * labels + l] / c, &r.embeddings.row(l));
                    }
                }
                g_role.dot(&pooled)
            }
            _ => 0.0,
        };
        let head_dot = if averaging {
            g_head.dot(&head_block)
        } else {
            0.0
        };

        for k in indexer.incoming(m) {
            let (head, _) = indexer.arc(k).expect("in range");
            d_z[k] += (g_head.dot(&h.row(head)) - head_dot - role_dot) / c;
            let mut dh = d_h.row_mut(head);
            dh.scaled_add(z[k] / c, &g_head);
            if let (Some(r), Some(dl), Some(dr)) = (roles, d_labeled.as_mut(), d_roles.as_mut()) {
                let labels = r.embeddings.nrows();
                for l in 0..labels {
                    let q = k * labels + l;
                    dl[q] += g_role.dot(&r.embeddings.row(l)) / c;
                    let mut row = dr.row_mut(l);
                    row.scaled_add(r.labeled[q] / c, &g_role);
                }
            }
        }
    }
    Ok(HeadFeatureGrads {
        h: d_h,
        z: d_z,
        labeled: d_labeled,
        roles: d_roles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::DepTree;

    fn reps(nodes: usize, dim: usize) -> Array2<f64> {
        Array2::from_shape_fn((nodes, dim), |(r, c)| (r * dim + c) as f64 * 0.1 + 0.05)
    }

    #[test]
    fn vertex_appends_head_row() {
        let ix = ArcIndexer::new(3, true).unwrap();
        let tree = DepTree::new(vec![2, 0, 2]).unwrap();
        let z = tree.encode(&ix).unwrap();
        let h = reps(4, 2);
        let out = head_feature_concat(&h, z.values(), &ix, HeadMode::Sum, None).unwrap();
        for m in 1..=3 {
            assert_eq!(out.slice(s![m - 1, ..2]), h.row(m));
            assert_eq!(out.slice(s![m - 1, 2..]), h.row(tree.head(m)));
        }
    }

    #[test]
    fn empty_structure_appends_zeros() {
        let ix = ArcIndexer::new(3, false).unwrap();
        let h = reps(4, 2);
        for mode in [HeadMode::Sum, HeadMode::Average] {
            let out = head_feature_concat(&h, &[0.0; 6], &ix, mode, None).unwrap();
            assert!(out.slice(s![.., 2..]).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn soft_structure_is_convex_combination() {
        let ix = ArcIndexer::new(2, true).unwrap();
        let h = reps(3, 2);
        // word 1: 0.25 from root, 0.75 from word 2
        let mut z = vec![0.0; 4];
        z[ix.index(0, 1).unwrap()] = 0.25;
        z[ix.index(2, 1).unwrap()] = 0.75;
        let out = head_feature_concat(&h, &z, &ix, HeadMode::Sum, None).unwrap();
        let want = &h.row(0) * 0.25 + &h.row(2) * 0.75;
        assert!(out
            .slice(s![0, 2..])
            .iter()
            .zip(&want)
            .all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn average_divides_by_head_count() {
        let ix = ArcIndexer::new(3, false).unwrap();
        let h = reps(4, 1);
        let mut z = vec![0.0; 6];
        z[ix.index(2, 1).unwrap()] = 1.0;
        z[ix.index(3, 1).unwrap()] = 1.0;
        let out = head_feature_concat(&h, &z, &ix, HeadMode::Average, None).unwrap();
        assert!((out[[0, 1]] - 0.5 * (h[[2, 0]] + h[[3, 0]])).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_structure() {
        let ix = ArcIndexer::new(3, true).unwrap();
        assert!(head_feature_concat(&reps(4, 2), &[0.0; 5], &ix, HeadMode::Sum, None).is_err());
    }
}
