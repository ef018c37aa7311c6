//! Change-of-numeraire operators.
//!
//! Measuring the riskless asset in units of the risky one turns a law `mu`
//! on `(0, inf)` into `S(mu)`, the law of `1/X` under the reweighting
//! `X dmu`; a martingale coupling `Q` into the coupling of the reciprocal
//! pair; a payoff `C` into `y C(1/x, 1/y)`; and a semi-static hedge into a
//! hedge of the transformed claim. All four transforms are involutions, and
//! they commute with pricing: the model-free bounds of `(mu, nu, C)` and of
//! the transformed triple coincide.

use std::sync::Arc;

use crate::couplings::{CouplingKernel, DiscreteKernel};
use crate::error::{Error, Result};
use crate::measures::{Marginal, TabulatedDensity};
use crate::pricing::Payoff;

/// A scalar function of one variable, shared by hedge transforms.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The marginal symmetry operator: law of `1/X` under `X dmu`.
///
/// Log-normals are fixed points; atom lists map atom-by-atom
/// (`(x, w) -> (1/x, x w)`); tabulated densities map node-by-node through
/// `p(1/x) / x^3` on the reciprocal grid.
pub fn symmetrize_marginal(m: &Marginal) -> Result<Marginal> {
    m.require_unit_mean()?;
    match m {
        Marginal::LogNormal(_) => Ok(m.clone()),
        Marginal::Atoms(_) => {
            let (points, weights) = m.as_atoms().expect("atomic");
            let pairs: Vec<(f64, f64)> = points
                .iter()
                .zip(weights)
                .map(|(&x, &w)| (1.0 / x, x * w))
                .collect();
            // the reciprocal weights sum to the original mean, so inherit its
            // tolerance rather than re-imposing the strict mass check
            Marginal::atoms_with_tol(pairs, crate::config::MEAN_TOL * 2.0)
        }
        Marginal::Tabulated(t) => {
            let xs = t.grid();
            let ds = t.density_values();
            let n = xs.len();
            let mut rx = Vec::with_capacity(n);
            let mut rd = Vec::with_capacity(n);
            for i in (0..n).rev() {
                let x = xs[i];
                rx.push(1.0 / x);
                rd.push(ds[i] * x * x * x);
            }
            let tab = TabulatedDensity::from_raw_nodes(rx, rd)?;
            let out = Marginal::Tabulated(tab);
            out.require_unit_mean()?;
            Ok(out)
        }
    }
}

/// The payoff symmetry operator: `(x, y) -> y C(1/x, 1/y)`.
///
/// The growth constant has no clean transformation law, so it is recomputed
/// numerically as the sup of `|C~| / (1 + x + y)` over a wide logarithmic
/// box and marked approximate. The sign of the cross-derivative flips.
pub fn symmetrize_payoff(c: &Payoff) -> Payoff {
    c.symmetrized()
}

/// The coupling symmetry operator.
///
/// Finite-atom kernels transform atom-by-atom: weight `w` on `y` from `x`
/// becomes weight `w y / x` on `1/y` from `1/x`. The band kernels transform
/// through their closed-form reflections.
pub fn symmetrize_coupling(k: &CouplingKernel) -> Result<CouplingKernel> {
    match k {
        CouplingKernel::Identity(m) => Ok(CouplingKernel::Identity(symmetrize_marginal(m)?)),
        CouplingKernel::ThreeBand(kk) => Ok(CouplingKernel::ThreeBand(kk.reflect()?)),
        CouplingKernel::TwoBand(kk) => Ok(CouplingKernel::TwoBand(kk.reflect()?)),
        CouplingKernel::Discrete(kk) => symmetrize_discrete(kk).map(CouplingKernel::Discrete),
    }
}

fn symmetrize_discrete(k: &DiscreteKernel) -> Result<DiscreteKernel> {
    let n = k.x_atoms().len();
    let m = k.y_atoms().len();
    // martingale gate: each row must average to its atom
    for i in 0..n {
        let x = k.x_atoms()[i];
        let row = k.kernel_at(x)?;
        let mean: f64 = row.iter().map(|(y, w)| y * w).sum();
        if (mean - x).abs() > 1e-8 * x.max(1.0) {
            return Err(Error::MartingaleViolation { x, residual: mean - x });
        }
    }
    // reciprocal atoms, reversed to keep them ascending
    let x_new: Vec<f64> = k.x_atoms().iter().rev().map(|&x| 1.0 / x).collect();
    let xw_new: Vec<f64> = k
        .x_atoms()
        .iter()
        .zip(k.x_weights())
        .rev()
        .map(|(&x, &w)| x * w)
        .collect();
    let y_new: Vec<f64> = k.y_atoms().iter().rev().map(|&y| 1.0 / y).collect();
    let mut joint = vec![0.0; n * m];
    for i in 0..n {
        let x = k.x_atoms()[i];
        let w_x = k.x_weights()[i];
        let row = k.kernel_at(x)?;
        for (y, w) in row {
            let j = k
                .y_atoms()
                .iter()
                .position(|&a| a == y)
                .expect("atom from kernel row");
            // reversed indices in the new matrix
            let (ii, jj) = (n - 1 - i, m - 1 - j);
            joint[ii * m + jj] = w_x * w * y / x;
        }
    }
    DiscreteKernel::from_joint(x_new, xw_new, y_new, &joint)
}

/// Transforms a semi-static hedge `(phi, psi, h)` of `C` into the hedge
/// `(phi~, psi~, h~)` of the transformed payoff:
///
/// ```text
/// phi~(x) = x phi(1/x),   psi~(y) = y psi(1/y),
/// h~(x)   = phi(1/x) - h(1/x) / x.
/// ```
pub fn symmetrize_hedge(phi: ScalarFn, psi: ScalarFn, h: ScalarFn) -> (ScalarFn, ScalarFn, ScalarFn) {
    let phi2 = Arc::clone(&phi);
    let phi_t: ScalarFn = Arc::new(move |x: f64| x * phi(1.0 / x));
    let psi_t: ScalarFn = Arc::new(move |y: f64| y * psi(1.0 / y));
    let h_t: ScalarFn = Arc::new(move |x: f64| phi2(1.0 / x) - h(1.0 / x) / x);
    (phi_t, psi_t, h_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{check_convex_order, DeltaProfile};
    use crate::numerics::log_grid;

    fn grid_for(m: &Marginal) -> Vec<f64> {
        let lo = m.quantile(1e-7).unwrap();
        let hi = m.quantile_from_sf(1e-7).unwrap();
        // offset so no probe lands exactly on an atom reciprocal
        log_grid(lo * 1.0000037, hi * 0.9999961, 421)
    }

    fn test_marginals() -> Vec<Marginal> {
        vec![
            Marginal::lognormal(0.2).unwrap(),
            Marginal::lognormal(0.3).unwrap(),
            Marginal::atoms(vec![(0.5, 2.0 / 3.0), (2.0, 1.0 / 3.0)]).unwrap(),
            {
                let (atoms, weights) = crate::lp::quantize(&Marginal::lognormal(0.2).unwrap(), 50)
                    .unwrap();
                Marginal::atoms(atoms.into_iter().zip(weights).collect()).unwrap()
            },
        ]
    }

    #[test]
    fn involution_on_cdf_grids() {
        for m in test_marginals() {
            let ss = symmetrize_marginal(&symmetrize_marginal(&m).unwrap()).unwrap();
            let mut worst = 0.0_f64;
            for y in grid_for(&m) {
                worst = worst.max((ss.cdf(y).unwrap() - m.cdf(y).unwrap()).abs());
            }
            assert!(worst <= 1e-9, "S o S drift {worst}");
        }
    }

    #[test]
    fn cdf_and_g_identities() {
        // F_S(y) = 1 - G(1/y)  and  G_S(y) = 1 - F(1/y)
        for m in test_marginals() {
            let s = symmetrize_marginal(&m).unwrap();
            let mut worst_f = 0.0_f64;
            let mut worst_g = 0.0_f64;
            for y in grid_for(&s) {
                let f_s = s.cdf(y).unwrap();
                let via_g = m.tail_expectation(1.0 / y).unwrap();
                worst_f = worst_f.max((f_s - via_g).abs());
                let g_s = s.cumulated_expectation(y).unwrap();
                let via_f = m.survival(1.0 / y).unwrap();
                worst_g = worst_g.max((g_s - via_f).abs());
            }
            assert!(worst_f <= 1e-9, "F identity drift {worst_f}");
            assert!(worst_g <= 1e-9, "G identity drift {worst_g}");
        }
    }

    #[test]
    fn lognormal_is_a_fixed_point() {
        for sigma in [0.1, 0.2, 0.5] {
            let m = Marginal::lognormal(sigma).unwrap();
            let s = symmetrize_marginal(&m).unwrap();
            assert!(matches!(s, Marginal::LogNormal(_)));
            // and the identity route confirms it numerically
            let mut worst = 0.0_f64;
            for y in grid_for(&m) {
                let implied = m.tail_expectation(1.0 / y).unwrap();
                worst = worst.max((implied - m.cdf(y).unwrap()).abs());
            }
            assert!(worst <= 1e-9, "sigma={sigma}: drift {worst}");
        }
    }

    #[test]
    fn atom_example_from_first_principles() {
        let m = Marginal::atoms(vec![(0.8, 2.0 / 3.0), (1.4, 1.0 / 3.0)]).unwrap();
        let s = symmetrize_marginal(&m).unwrap();
        let (pts, wts) = s.as_atoms().unwrap();
        assert!((pts[0] - 1.0 / 1.4).abs() < 1e-15);
        assert!((pts[1] - 1.25).abs() < 1e-15);
        assert!((wts[0] - 1.4 / 3.0).abs() < 1e-15);
        assert!((wts[1] - 8.0 / 15.0).abs() < 1e-15);
        // the 0.5/2 two-pointer is S-invariant
        let inv = Marginal::atoms(vec![(0.5, 2.0 / 3.0), (2.0, 1.0 / 3.0)]).unwrap();
        let s = symmetrize_marginal(&inv).unwrap();
        let (pts, wts) = s.as_atoms().unwrap();
        assert_eq!(pts, [0.5, 2.0]);
        assert!((wts[0] - 2.0 / 3.0).abs() < 1e-15 && (wts[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn convex_order_is_preserved() {
        let mu = Marginal::lognormal(0.2).unwrap();
        let nu = Marginal::lognormal(0.3).unwrap();
        assert!(check_convex_order(&mu, &nu, 500).unwrap().ok);
        let (s_mu, s_nu) = (symmetrize_marginal(&mu).unwrap(), symmetrize_marginal(&nu).unwrap());
        assert!(check_convex_order(&s_mu, &s_nu, 500).unwrap().ok);
    }

    #[test]
    fn extremizer_reciprocity() {
        // the minimizer of the reciprocal pair's gap is 1/m
        let mu = Marginal::lognormal(0.2).unwrap();
        let nu = Marginal::lognormal(0.35).unwrap();
        let prof = DeltaProfile::new(&mu, &nu).unwrap();
        let s_prof = DeltaProfile::new(
            &symmetrize_marginal(&mu).unwrap(),
            &symmetrize_marginal(&nu).unwrap(),
        )
        .unwrap();
        assert!((s_prof.m_tilde - 1.0 / prof.m).abs() < 1e-6);
        assert!((s_prof.m - 1.0 / prof.m_tilde).abs() < 1e-6);
    }

    #[test]
    fn discrete_coupling_transform_and_involution() {
        // atoms at x=1 with weights 2/3 on 0.5 and 1/3 on 2
        let k = DiscreteKernel::from_joint(
            vec![1.0],
            vec![1.0],
            vec![0.5, 2.0],
            &[2.0 / 3.0, 1.0 / 3.0],
        )
        .unwrap();
        let s = symmetrize_discrete(&k).unwrap();
        let row = s.kernel_at(1.0).unwrap();
        // weights w y / x: 2/3 * 0.5 = 1/3 on 1/0.5 = 2; 1/3 * 2 = 2/3 on 0.5
        assert_eq!(row.len(), 2);
        assert!((row[0].0 - 0.5).abs() < 1e-15 && (row[0].1 - 2.0 / 3.0).abs() < 1e-14);
        assert!((row[1].0 - 2.0).abs() < 1e-15 && (row[1].1 - 1.0 / 3.0).abs() < 1e-14);
        // involution at the atom level
        let ss = symmetrize_discrete(&s).unwrap();
        let row = ss.kernel_at(1.0).unwrap();
        assert!((row[0].0 - 0.5).abs() < 1e-15 && (row[0].1 - 2.0 / 3.0).abs() < 1e-14);
        let id = DiscreteKernel::from_joint(vec![1.0], vec![1.0], vec![1.0], &[1.0]).unwrap();
        let s = symmetrize_discrete(&id).unwrap();
        assert_eq!(s.kernel_at(1.0).unwrap(), vec![(1.0, 1.0)]);
    }

    #[test]
    fn transformed_coupling_projects_onto_transformed_marginals() {
        let mu = Marginal::lognormal(0.2).unwrap();
        let nu = Marginal::lognormal(0.3).unwrap();
        let k = crate::couplings::build_hk(&mu, &nu, 96).unwrap();
        let s = symmetrize_coupling(&crate::couplings::CouplingKernel::ThreeBand(k)).unwrap();
        let s_mu = symmetrize_marginal(&mu).unwrap();
        let s_nu = symmetrize_marginal(&nu).unwrap();
        let rep = crate::couplings::validate_coupling(&s, &s_mu, &s_nu).unwrap();
        assert!(rep.marginal_err <= 1e-4, "marginal {}", rep.marginal_err);
        assert!(rep.martingale_err <= 1e-8, "martingale {}", rep.martingale_err);
    }

    #[test]
    fn martingale_gate_rejects_bad_rows() {
        let k = DiscreteKernel::from_joint(
            vec![1.0],
            vec![1.0],
            vec![0.5, 2.0],
            &[0.5, 0.5], // mean 1.25, not 1
        )
        .unwrap();
        assert!(matches!(
            symmetrize_discrete(&k),
            Err(Error::MartingaleViolation { .. })
        ));
    }

    #[test]
    fn hedge_transform_identities() {
        // C = y - 1: (phi, psi, h) = (0, id - 1, 0); transformed payoff is 1 - y
        let phi: ScalarFn = Arc::new(|_| 0.0);
        let psi: ScalarFn = Arc::new(|y| y - 1.0);
        let h: ScalarFn = Arc::new(|_| 0.0);
        let (pt, st, ht) = symmetrize_hedge(phi, psi, h);
        let mut worst = 0.0_f64;
        for k in 0..50 {
            let x = 0.2 + 0.15 * k as f64;
            let y = 0.3 + 0.11 * k as f64;
            let recon = pt(x) + st(y) + ht(x) * (y - x);
            worst = worst.max((recon - (1.0 - y)).abs());
        }
        assert!(worst <= 1e-12);

        // C = y - x: (0, 0, 1); transformed payoff is 1 - y/x with h~ = -1/x
        let phi: ScalarFn = Arc::new(|_| 0.0);
        let psi: ScalarFn = Arc::new(|_| 0.0);
        let h: ScalarFn = Arc::new(|_| 1.0);
        let (pt, st, ht) = symmetrize_hedge(phi, psi, h);
        let mut worst = 0.0_f64;
        for k in 1..50 {
            let x = 0.2 + 0.15 * k as f64;
            let y = 0.3 + 0.11 * k as f64;
            let recon = pt(x) + st(y) + ht(x) * (y - x);
            worst = worst.max((recon - (1.0 - y / x)).abs());
            worst = worst.max((ht(x) + 1.0 / x).abs());
        }
        assert!(worst <= 1e-12);

        // zero triple stays zero
        let z: ScalarFn = Arc::new(|_| 0.0);
        let (pt, st, ht) = symmetrize_hedge(z.clone(), z.clone(), z);
        assert_eq!(pt(2.0) + st(3.0) + ht(2.0), 0.0);
    }
}
