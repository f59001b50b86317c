use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Target set `{p : Σp = mass, 0 ≤ p ≤ upper}` together with the point to
/// project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexTarget {
    pub values: Vec<f64>,
    pub mass: f64,
    pub upper: f64,
}

impl SimplexTarget {
    /// The probability simplex with unit upper bounds.
    pub fn unit(values: Vec<f64>) -> Self {
        SimplexTarget {
            values,
            mass: 1.0,
            upper: 1.0,
        }
    }
}

/// Euclidean projection onto the box-constrained simplex.
///
/// The solution is `clamp(v − τ, 0, u)` for the unique threshold `τ` with
/// total mass `m`. The mass is piecewise linear and nonincreasing in `τ`
/// with breakpoints at `v_i` and `v_i − u`, so `τ` is found by a binary
/// search over the sorted breakpoints followed by exact interpolation.
pub fn project_simplex(target: &SimplexTarget) -> Result<Vec<f64>> {
    let SimplexTarget {
        values,
        mass,
        upper,
    } = target;
    let (mass, upper) = (*mass, *upper);
    let k = values.len();
    if !(mass > 0.0 && mass.is_finite()) || !(upper > 0.0 && upper.is_finite()) {
        return Err(Error::Infeasible(format!(
            "mass {mass} and upper bound {upper} must be positive and finite"
        )));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("cannot project non-finite values"));
    }
    let capacity = k as f64 * upper;
    if capacity < mass {
        return Err(Error::Infeasible(format!(
            "{k} coordinates bounded by {upper} cannot hold mass {mass}"
        )));
    }
    if capacity == mass {
        return Ok(vec![upper; k]);
    }

    let total = |tau: f64| -> f64 { values.iter().map(|v| (v - tau).clamp(0.0, upper)).sum() };
    let mut breaks: Vec<f64> = values.iter().flat_map(|&v| [v - upper, v]).collect();
    breaks.sort_by(f64::total_cmp);
    // total(breaks[0]) = k·u > mass and total(last) = 0 < mass
    let hi = breaks.partition_point(|&b| total(b) >= mass);
    let (b_lo, b_hi) = (breaks[hi - 1], breaks[hi]);
    let (f_lo, f_hi) = (total(b_lo), total(b_hi));
    let tau = if f_lo == f_hi {
        b_lo
    } else {
        b_lo + (f_lo - mass) * (b_hi - b_lo) / (f_lo - f_hi)
    };
    Ok(values.iter().map(|v| (v - tau).clamp(0.0, upper)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn examples() {
        let p = project_simplex(&SimplexTarget::unit(vec![0.3, 0.3])).unwrap();
        assert!(close(&p, &[0.5, 0.5]));
        let p = project_simplex(&SimplexTarget::unit(vec![2.0, 0.0, 0.0])).unwrap();
        assert!(close(&p, &[1.0, 0.0, 0.0]));
        let p = project_simplex(&SimplexTarget::unit(vec![0.5, 0.2, -0.1])).unwrap();
        assert!(close(&p, &[19.0 / 30.0, 10.0 / 30.0, 1.0 / 30.0]));
    }

    #[test]
    fn single_coordinate_is_forced() {
        for v in [-4.0, 0.3, 7.0] {
            assert_eq!(
                project_simplex(&SimplexTarget::unit(vec![v])).unwrap(),
                vec![1.0]
            );
        }
    }

    #[test]
    fn upper_bound_binds() {
        let t = SimplexTarget {
            values: vec![5.0, 0.0, 0.0],
            mass: 1.5,
            upper: 1.0,
        };
        let p = project_simplex(&t).unwrap();
        assert!(close(&p, &[1.0, 0.25, 0.25]));
    }

    #[test]
    fn infeasible() {
        let t = SimplexTarget {
            values: vec![0.0, 0.0],
            mass: 3.0,
            upper: 1.0,
        };
        assert!(matches!(project_simplex(&t), Err(Error::Infeasible(_))));
        assert!(project_simplex(&SimplexTarget::unit(vec![])).is_err());
    }
}
