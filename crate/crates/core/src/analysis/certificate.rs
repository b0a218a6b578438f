//! The 3x3 certificate matrix, its Schur-complement cross-check, the search
//! over the free scalar `a`, and bisection for the smallest certifiable gamma.

use super::{AnalysisError, OutputWeights};
use crate::graph::{self, Graph};
use crate::linalg::{self, SymMatrix};

/// Tie zone for `Γ < 0`: margins in `[-tol, tol]` are indeterminate.
pub const DEFINITENESS_TOL: f64 = 1e-9;
/// `min_gamma` gives up above this attenuation level.
pub const MIN_GAMMA_CEILING: f64 = 1e6;

const GOLDEN_ITERATIONS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
    /// Largest eigenvalue inside the tie zone; counted as infeasible.
    Indeterminate,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Feasible => "feasible",
            Self::Infeasible => "infeasible",
            Self::Indeterminate => "indeterminate",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Evidence for (or against) the LMI condition on a given network.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaCertificate {
    pub lambda2: f64,
    pub kbar: f64,
    /// `k̄² / λ₂²`; the chosen `a` must exceed it.
    pub a_lower_bound: f64,
    pub a: f64,
    pub gamma_matrix: SymMatrix,
    pub eigenvalues: [f64; 3],
    /// Largest eigenvalue of `gamma_matrix`.
    pub margin: f64,
    pub verdict: Verdict,
    pub feasible: bool,
    pub a_constraint_satisfied: bool,
}

/// ```text
/// Γ = [ -(2 λ₂ a - c1²)   k̄/2             a   ]
///     [  k̄/2             -(λ₂ - c2²)      1/2 ]
///     [  a                1/2            -γ²  ]
/// ```
pub fn gamma_matrix(lambda2: f64, kbar: f64, a: f64, w: &OutputWeights) -> Result<SymMatrix, AnalysisError> {
    if lambda2.is_nan() || lambda2 <= 0.0 {
        return Err(AnalysisError::GraphNotConnected(lambda2));
    }
    if !(lambda2.is_finite() && kbar.is_finite() && a.is_finite()) {
        return Err(AnalysisError::InvalidParameter("certificate inputs must be finite".into()));
    }
    let (c1, c2, gamma) = (w.c1(), w.c2(), w.gamma());
    Ok(SymMatrix::from_row_major(
        3,
        &[
            -(2.0 * lambda2 * a - c1 * c1),
            kbar / 2.0,
            a,
            kbar / 2.0,
            -(lambda2 - c2 * c2),
            0.5,
            a,
            0.5,
            -(gamma * gamma),
        ],
    )?)
}

/// Schur complement of the `-γ²` corner of `Γ`: `A + (1/γ²) B Bᵀ` with
/// `B = (a, 1/2)ᵀ`, returned row-major as `[s11, s12, s22]`.
pub fn schur_complement(lambda2: f64, kbar: f64, a: f64, w: &OutputWeights) -> [f64; 3] {
    let inv_g2 = 1.0 / (w.gamma() * w.gamma());
    let s11 = -(2.0 * lambda2 * a - w.c1() * w.c1()) + a * a * inv_g2;
    let s12 = kbar / 2.0 + a * 0.5 * inv_g2;
    let s22 = -(lambda2 - w.c2() * w.c2()) + 0.25 * inv_g2;
    [s11, s12, s22]
}

/// `Γ < 0` decided through the Schur complement alone: since `-γ² < 0`,
/// `Γ < 0` iff the 2x2 complement is negative definite.
pub fn schur_feasibility(lambda2: f64, kbar: f64, a: f64, w: &OutputWeights) -> bool {
    let [s11, s12, s22] = schur_complement(lambda2, kbar, a, w);
    s11 < 0.0 && s11 * s22 - s12 * s12 > 0.0
}

fn max_eigenvalue(lambda2: f64, kbar: f64, a: f64, w: &OutputWeights) -> Result<f64, AnalysisError> {
    Ok(linalg::sym_eigen(&gamma_matrix(lambda2, kbar, a, w)?)?.max_eigenvalue())
}

fn validate_gains(g: &Graph, gains: &[f64]) -> Result<f64, AnalysisError> {
    if gains.len() != g.n() {
        return Err(AnalysisError::InvalidParameter(format!(
            "{} gains given for {} agents",
            gains.len(),
            g.n()
        )));
    }
    if let Some(k) = gains.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
        return Err(AnalysisError::InvalidParameter(format!("gains must be positive, got {k}")));
    }
    Ok(gains.iter().copied().fold(0.0, f64::max))
}

/// Searches `a ∈ (k̄²/λ₂², a_max]` for `Γ(a) < 0`.
///
/// A logarithmic grid of `grid_points` values is scanned first; golden-section
/// search then refines around the best grid point. `Γ` is affine in `a`, so
/// its largest eigenvalue is convex in `a` and the refinement cannot miss a
/// better basin, but the grid result is kept whenever refinement fails to
/// improve on it.
pub fn certify_attenuation(
    g: &Graph,
    gains: &[f64],
    w: &OutputWeights,
    a_max: f64,
    grid_points: usize,
) -> Result<GammaCertificate, AnalysisError> {
    if g.n() < 2 {
        return Err(AnalysisError::InvalidParameter("the certificate needs at least two agents".into()));
    }
    if !graph::is_connected(g) {
        return Err(AnalysisError::GraphNotConnected(graph::algebraic_connectivity(g)?));
    }
    if !(a_max.is_finite() && a_max > 0.0) {
        return Err(AnalysisError::InvalidParameter(format!("a_max must be positive, got {a_max}")));
    }
    if grid_points == 0 {
        return Err(AnalysisError::InvalidParameter("grid needs at least one point".into()));
    }
    let kbar = validate_gains(g, gains)?;
    let lambda2 = graph::algebraic_connectivity(g)?;
    let a_lower_bound = kbar * kbar / (lambda2 * lambda2);

    // open lower end of the interval
    let start = a_lower_bound * (1.0 + 1e-9);
    let a = if start >= a_max {
        a_max
    } else {
        best_a(lambda2, kbar, w, start, a_max, grid_points)?
    };

    let gamma = gamma_matrix(lambda2, kbar, a, w)?;
    let eig = linalg::sym_eigen(&gamma)?;
    let def = linalg::is_negative_definite(&gamma, DEFINITENESS_TOL)?;
    let a_constraint_satisfied = a > a_lower_bound;
    let verdict = if !a_constraint_satisfied {
        Verdict::Infeasible
    } else if def.negative_definite {
        Verdict::Feasible
    } else if def.is_indeterminate(DEFINITENESS_TOL) {
        Verdict::Indeterminate
    } else {
        Verdict::Infeasible
    };

    Ok(GammaCertificate {
        lambda2,
        kbar,
        a_lower_bound,
        a,
        gamma_matrix: gamma,
        eigenvalues: [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]],
        margin: def.margin,
        verdict,
        feasible: verdict == Verdict::Feasible,
        a_constraint_satisfied,
    })
}

fn best_a(lambda2: f64, kbar: f64, w: &OutputWeights, lo: f64, hi: f64, points: usize) -> Result<f64, AnalysisError> {
    let grid: Vec<f64> = if points == 1 {
        vec![hi]
    } else {
        let ratio = (hi / lo).ln();
        (0..points)
            .map(|k| {
                if k == points - 1 {
                    hi
                } else {
                    lo * (ratio * k as f64 / (points - 1) as f64).exp()
                }
            })
            .collect()
    };
    let values = grid
        .iter()
        .map(|&a| max_eigenvalue(lambda2, kbar, a, w))
        .collect::<Result<Vec<_>, _>>()?;
    let best = (0..grid.len())
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("grid is non-empty");

    let left = grid[best.saturating_sub(1)];
    let right = grid[(best + 1).min(grid.len() - 1)];
    if left == right {
        return Ok(grid[best]);
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (left, right);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = max_eigenvalue(lambda2, kbar, x1, w)?;
    let mut f2 = max_eigenvalue(lambda2, kbar, x2, w)?;
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = max_eigenvalue(lambda2, kbar, x1, w)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = max_eigenvalue(lambda2, kbar, x2, w)?;
        }
    }
    let (refined, f_refined) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if f_refined < values[best] && refined > lo {
        Ok(refined)
    } else {
        Ok(grid[best])
    }
}

/// Smallest certifiable attenuation level, by bisection on `gamma`.
///
/// Only the `-γ²` corner of `Γ` depends on `gamma`, so feasibility is monotone
/// in `gamma`. The result `γ*` satisfies: `γ* + tol` is feasible and
/// `γ* - tol` is not.
#[allow(clippy::too_many_arguments)]
pub fn min_gamma(
    g: &Graph,
    gains: &[f64],
    c1: f64,
    c2: f64,
    a_max: f64,
    grid_points: usize,
    tol: f64,
) -> Result<f64, AnalysisError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(AnalysisError::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let feasible = |gamma: f64| -> Result<bool, AnalysisError> {
        let w = OutputWeights::new(c1, c2, gamma)?;
        Ok(certify_attenuation(g, gains, &w, a_max, grid_points)?.feasible)
    };

    let mut hi = 1.0;
    let mut lo = 0.0;
    while !feasible(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > MIN_GAMMA_CEILING {
            return Err(AnalysisError::InfeasibleConfiguration { ceiling: MIN_GAMMA_CEILING });
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(c: f64, gamma: f64) -> OutputWeights {
        OutputWeights::new(c, c, gamma).unwrap()
    }

    #[test]
    fn gamma_matrix_substitution() {
        let g = gamma_matrix(3.0, 1.0, 0.5, &weights(0.1, 1.0)).unwrap();
        let want = [[-2.99, 0.5, 0.5], [0.5, -2.99, 0.5], [0.5, 0.5, -1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((g.get(i, j) - want[i][j]).abs() < 1e-15);
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
    }

    #[test]
    fn gamma_matrix_degenerate_parameters() {
        let tiny = OutputWeights::new(1e-300, 1e-300, 1.0).unwrap();
        let g = gamma_matrix(2.0, 0.0, 0.0, &tiny).unwrap();
        let want = [[0.0, 0.0, 0.0], [0.0, -2.0, 0.5], [0.0, 0.5, -1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.get(i, j), want[i][j]);
            }
        }
    }

    #[test]
    fn gamma_matrix_requires_connectivity() {
        assert!(matches!(
            gamma_matrix(0.0, 1.0, 1.0, &weights(0.1, 1.0)),
            Err(AnalysisError::GraphNotConnected(_))
        ));
    }

    #[test]
    fn schur_examples() {
        assert!(schur_feasibility(3.0, 1.0, 0.5, &weights(0.1, 1.0)));
        assert!(!schur_feasibility(3.0, 1.0, 0.5, &weights(0.1, 0.01)));
    }

    #[test]
    fn k3_certificate() {
        let k3 = Graph::complete(3, 1.0).unwrap();
        let cert = certify_attenuation(&k3, &[1.0, 1.0, 1.0], &weights(0.1, 1.0), 10.0, 200).unwrap();
        assert!(cert.feasible);
        assert_eq!(cert.verdict, Verdict::Feasible);
        assert!(cert.a_constraint_satisfied);
        assert!((cert.lambda2 - 3.0).abs() < 1e-9);
        assert_eq!(cert.kbar, 1.0);
        assert!(cert.a > 1.0 / 9.0 && cert.a <= 10.0);
        // the refined a does at least as well as the hand witness a = 0.5
        let witness = max_eigenvalue(cert.lambda2, 1.0, 0.5, &weights(0.1, 1.0)).unwrap();
        assert!(cert.margin <= witness);

        let tight = certify_attenuation(&k3, &[1.0, 1.0, 1.0], &weights(0.1, 0.01), 10.0, 200).unwrap();
        assert!(!tight.feasible);
        assert_eq!(tight.verdict, Verdict::Infeasible);
    }

    #[test]
    fn disconnected_graph_rejected() {
        let g = Graph::new(3, [(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            certify_attenuation(&g, &[1.0; 3], &weights(0.1, 1.0), 10.0, 50),
            Err(AnalysisError::GraphNotConnected(_))
        ));
    }

    #[test]
    fn empty_search_interval_is_infeasible() {
        // k̄²/λ₂² = 100/9 > a_max
        let k3 = Graph::complete(3, 1.0).unwrap();
        let cert = certify_attenuation(&k3, &[10.0; 3], &weights(0.1, 100.0), 1.0, 20).unwrap();
        assert!(!cert.a_constraint_satisfied);
        assert!(!cert.feasible);
    }

    #[test]
    fn min_gamma_bracketed() {
        let k3 = Graph::complete(3, 1.0).unwrap();
        let g = min_gamma(&k3, &[1.0; 3], 0.1, 0.1, 10.0, 200, 1e-4).unwrap();
        assert!(g > 0.01 && g < 1.0, "{g}");
        let w = |gamma| weights(0.1, gamma);
        assert!(certify_attenuation(&k3, &[1.0; 3], &w(g + 1e-4), 10.0, 200).unwrap().feasible);
        assert!(!certify_attenuation(&k3, &[1.0; 3], &w(g - 1e-4), 10.0, 200).unwrap().feasible);
    }

    #[test]
    fn min_gamma_infeasible_family() {
        // c2² > λ₂ makes the (2,2) entry positive for every a and gamma
        let k3 = Graph::complete(3, 1.0).unwrap();
        assert!(matches!(
            min_gamma(&k3, &[1.0; 3], 0.1, 2.0, 10.0, 20, 1e-3),
            Err(AnalysisError::InfeasibleConfiguration { .. })
        ));
    }
}
