//! Discrete martingale-transport oracle.
//!
//! Quantizes a marginal pair, assembles the coupling polytope
//!
//! ```text
//! q_ij >= 0,   sum_j q_ij = w_i,   sum_i q_ij = v_j,
//! sum_j q_ij (y_j - x_i) = 0  for every i,
//! ```
//!
//! and optimizes a cost over it in both directions with an in-repo simplex.
//! The optimal basis also yields the dual semi-static hedge `(phi, psi, h)`,
//! verified by complementary slackness and the sub/super-replication
//! inequalities. This module is the brute-force referee for every explicit
//! construction in the crate.

mod simplex;

use crate::error::{Error, Result};
use crate::measures::Marginal;
use crate::pricing::Payoff;
use simplex::{solve_min, SparseCol, StandardLp};

/// Optimization direction for the model-free bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Min,
    Max,
}

/// Quantization scheme for building instances from continuous marginals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantScheme {
    /// Equal-probability quantile cells, atom = conditional mean.
    Quantile,
    /// Log-spaced cells whose cut points are closed under `x -> 1/x`, so the
    /// quantization of a numeraire-symmetric marginal is itself exactly
    /// symmetric.
    SymmetricLog,
}

/// Configuration of the oracle discretization.
#[derive(Clone, Copy, Debug)]
pub struct LpConfig {
    pub atoms: usize,
    pub scheme: QuantScheme,
}

impl Default for LpConfig {
    fn default() -> Self {
        LpConfig { atoms: 100, scheme: QuantScheme::Quantile }
    }
}

/// Quantizes a marginal into `n` equal-probability cells, each replaced by
/// its conditional mean; preserves the overall mean to roundoff.
pub fn quantize(m: &Marginal, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2 cells, got {n}")));
    }
    if let Some((points, weights)) = m.as_atoms() {
        if n >= points.len() {
            return Ok((points.to_vec(), weights.to_vec()));
        }
        return Ok(quantize_atoms(points, weights, n));
    }
    let mut atoms = Vec::with_capacity(n);
    let weights = vec![1.0 / n as f64; n];
    // track both G and its tail so upper-cell increments difference the
    // small side instead of cancelling near the mean
    let (mut g_prev, mut t_prev) = (0.0, m.mean());
    for k in 1..=n {
        let (g_next, t_next) = if k == n {
            (m.mean(), 0.0)
        } else {
            let q = m.quantile(k as f64 / n as f64)?;
            (m.cumulated_expectation(q)?, m.tail_expectation(q)?)
        };
        let dg = if g_next <= 0.5 * m.mean() { g_next - g_prev } else { t_prev - t_next };
        atoms.push(n as f64 * dg);
        g_prev = g_next;
        t_prev = t_next;
    }
    Ok((atoms, weights))
}

/// Mass-walk quantization of an atom list into `n` equal-probability cells.
fn quantize_atoms(points: &[f64], weights: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let cell = 1.0 / n as f64;
    let mut atoms = Vec::with_capacity(n);
    let mut out_w = Vec::with_capacity(n);
    let mut i = 0usize;
    let mut left = weights[0];
    for _ in 0..n {
        let mut need = cell;
        let mut moment = 0.0;
        while need > 1e-15 && i < points.len() {
            let take = need.min(left);
            moment += points[i] * take;
            need -= take;
            left -= take;
            if left <= 1e-15 {
                i += 1;
                if i < points.len() {
                    left = weights[i];
                }
            }
        }
        atoms.push(moment / cell);
        out_w.push(cell);
    }
    (atoms, out_w)
}

/// Quantizes on explicit cell cut points: cells `(cuts[k], cuts[k+1]]` plus
/// the two unbounded tails. Cells with no mass are dropped.
pub fn quantize_cells(m: &Marginal, cuts: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if cuts.len() < 2 || cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("cuts must be increasing, length >= 2".into()));
    }
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    // four accumulators so each increment differences whichever side of the
    // distribution is small there
    let (mut f_prev, mut s_prev) = (0.0, 1.0);
    let (mut g_prev, mut t_prev) = (0.0, m.mean());
    for k in 0..=cuts.len() {
        let (f_next, s_next, g_next, t_next) = if k == cuts.len() {
            (1.0, 0.0, m.mean(), 0.0)
        } else {
            let c = cuts[k];
            (m.cdf(c)?, m.survival(c)?, m.cumulated_expectation(c)?, m.tail_expectation(c)?)
        };
        let mass = if f_next <= 0.5 { f_next - f_prev } else { s_prev - s_next };
        let dg = if g_next <= 0.5 * m.mean() { g_next - g_prev } else { t_prev - t_next };
        if mass > 1e-14 {
            atoms.push(dg / mass);
            weights.push(mass);
        }
        f_prev = f_next;
        s_prev = s_next;
        g_prev = g_next;
        t_prev = t_next;
    }
    Ok((atoms, weights))
}

/// Log-spaced cut points closed under `x -> 1/x`, spanning both marginals'
/// extreme quantiles.
pub fn symmetric_log_cuts(mu: &Marginal, nu: &Marginal, n: usize) -> Result<Vec<f64>> {
    let tail = crate::config::TAIL_QUANTILE;
    let mut span = 0.0_f64;
    for m in [mu, nu] {
        span = span
            .max(-m.quantile(tail)?.ln())
            .max(m.quantile_from_sf(tail)?.ln());
    }
    let k = n.max(2) - 1;
    let mut cuts = Vec::with_capacity(k);
    for i in 0..k {
        let t = -span + 2.0 * span * i as f64 / (k - 1).max(1) as f64;
        cuts.push(t.exp());
    }
    // enforce exact reciprocal pairing against rounding
    let len = cuts.len();
    for i in 0..len / 2 {
        let v = cuts[len - 1 - i];
        cuts[i] = 1.0 / v;
    }
    if len % 2 == 1 {
        cuts[len / 2] = 1.0;
    }
    Ok(cuts)
}

/// A quantized martingale-transport problem: atoms, weights and the cost
/// matrix (row-major over `x` then `y`).
#[derive(Clone, Debug)]
pub struct DiscreteMotInstance {
    pub x_atoms: Vec<f64>,
    pub x_weights: Vec<f64>,
    pub y_atoms: Vec<f64>,
    pub y_weights: Vec<f64>,
    pub cost: Vec<f64>,
    /// Payoff spec the cost was built from, when known.
    pub cost_label: Option<String>,
    /// Whether the second marginal was perturbed to restore the discrete
    /// convex order.
    pub repaired: bool,
}

/// Named outcome of one instance invariant.
#[derive(Clone, Debug)]
pub struct InstanceCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl DiscreteMotInstance {
    /// Builds an instance, checking weights, means and the discrete convex
    /// order; a failed order check triggers the minimal-perturbation repair.
    pub fn new(
        x_atoms: Vec<f64>,
        x_weights: Vec<f64>,
        y_atoms: Vec<f64>,
        y_weights: Vec<f64>,
        cost: Vec<f64>,
        cost_label: Option<String>,
    ) -> Result<Self> {
        let mut inst = DiscreteMotInstance {
            x_atoms,
            x_weights,
            y_atoms,
            y_weights,
            cost,
            cost_label,
            repaired: false,
        };
        inst.validate_shape()?;
        let (ok, deficit, _) = inst.convex_order_deficit();
        if !ok {
            inst.repair_convex_order()?;
            inst.repaired = true;
            let (ok2, deficit2, strike) = inst.convex_order_deficit();
            if !ok2 {
                return Err(Error::Infeasible(format!(
                    "convex-order repair failed: deficit {deficit2:.3e} at strike {strike} \
                     (was {deficit:.3e})"
                )));
            }
        }
        Ok(inst)
    }

    /// Quantizes a marginal pair and evaluates the payoff on the atom grid.
    pub fn from_marginals(
        mu: &Marginal,
        nu: &Marginal,
        payoff: &Payoff,
        cfg: &LpConfig,
    ) -> Result<Self> {
        let ((xa, xw), (ya, yw)) = match cfg.scheme {
            QuantScheme::Quantile => (quantize(mu, cfg.atoms)?, quantize(nu, cfg.atoms)?),
            QuantScheme::SymmetricLog => {
                let cuts = symmetric_log_cuts(mu, nu, cfg.atoms)?;
                (quantize_cells(mu, &cuts)?, quantize_cells(nu, &cuts)?)
            }
        };
        let cost = cost_matrix(&xa, &ya, payoff);
        Self::new(xa, xw, ya, yw, cost, Some(payoff.label.clone()))
    }

    pub fn n(&self) -> usize {
        self.x_atoms.len()
    }

    pub fn m(&self) -> usize {
        self.y_atoms.len()
    }

    fn validate_shape(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        if n == 0 || m == 0 || self.cost.len() != n * m {
            return Err(Error::Domain("instance dimensions mismatch".into()));
        }
        if self.x_weights.len() != n || self.y_weights.len() != m {
            return Err(Error::Domain("weight vector lengths mismatch".into()));
        }
        if self.x_weights.iter().chain(&self.y_weights).any(|&w| w <= 0.0) {
            return Err(Error::Domain("weights must be positive".into()));
        }
        let sx: f64 = self.x_weights.iter().sum();
        let sy: f64 = self.y_weights.iter().sum();
        if (sx - 1.0).abs() > 1e-12 || (sy - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights sum to {sx} and {sy}, not 1")));
        }
        let mx = self.mean_x();
        let my = self.mean_y();
        if (mx - my).abs() > 1e-9 {
            return Err(Error::MeanMismatch { mean: my, expected: mx });
        }
        Ok(())
    }

    pub fn mean_x(&self) -> f64 {
        self.x_atoms.iter().zip(&self.x_weights).map(|(a, w)| a * w).sum()
    }

    pub fn mean_y(&self) -> f64 {
        self.y_atoms.iter().zip(&self.y_weights).map(|(a, w)| a * w).sum()
    }

    /// Worst call-price deficit over strikes at the union of atoms.
    /// Positive deficit means the discrete convex order fails there.
    pub fn convex_order_deficit(&self) -> (bool, f64, f64) {
        let call = |atoms: &[f64], weights: &[f64], k: f64| -> f64 {
            atoms
                .iter()
                .zip(weights)
                .map(|(&a, &w)| w * (a - k).max(0.0))
                .sum()
        };
        let mut worst = 0.0_f64;
        let mut at = 0.0_f64;
        for &k in self.x_atoms.iter().chain(&self.y_atoms) {
            let deficit = call(&self.x_atoms, &self.x_weights, k)
                - call(&self.y_atoms, &self.y_weights, k);
            if deficit > worst {
                worst = deficit;
                at = k;
            }
        }
        (worst <= 1e-10, worst, at)
    }

    /// Minimal (sup-norm) perturbation of the `y` weights restoring equal
    /// means and call-price dominance, solved as a small feasibility LP.
    fn repair_convex_order(&mut self) -> Result<()> {
        let m = self.m();
        let call_x = |k: f64| -> f64 {
            self.x_atoms
                .iter()
                .zip(&self.x_weights)
                .map(|(&a, &w)| w * (a - k).max(0.0))
                .sum()
        };
        let call_y = |k: f64| -> f64 {
            self.y_atoms
                .iter()
                .zip(&self.y_weights)
                .map(|(&a, &w)| w * (a - k).max(0.0))
                .sum()
        };
        let strikes: Vec<f64> = self.x_atoms.iter().chain(&self.y_atoms).copied().collect();

        // variables: d+ (m), d- (m), t (1), slack per strike (s), slack per
        // cap constraint (2m), slack per positivity constraint (m)
        let nv = 2 * m + 1;
        let ns = strikes.len();
        let total = nv + ns + 2 * m + m;
        let mut cols: Vec<SparseCol> = (0..total).map(|_| SparseCol { entries: vec![] }).collect();
        let mut rhs = Vec::new();
        let mut row = 0u32;
        let push = |cols: &mut Vec<SparseCol>, j: usize, r: u32, v: f64| {
            cols[j].entries.push((r, v));
        };

        // sum d = 0 stated as two inequalities would need free slacks; keep
        // the equality rows and let the sign flip via d+ / d-
        // row: sum_j (d+_j - d-_j) = 0
        for j in 0..m {
            push(&mut cols, j, row, 1.0);
            push(&mut cols, m + j, row, -1.0);
        }
        rhs.push(0.0);
        row += 1;

        // row: sum_j y_j (d+_j - d-_j) = mean_x - mean_y
        let dm = self.mean_x() - self.mean_y();
        let (sign, b) = if dm >= 0.0 { (1.0, dm) } else { (-1.0, -dm) };
        for j in 0..m {
            push(&mut cols, j, row, sign * self.y_atoms[j]);
            push(&mut cols, m + j, row, -sign * self.y_atoms[j]);
        }
        rhs.push(b);
        row += 1;

        // strike rows: sum_j (y_j - K)^+ (d+_j - d-_j) - slack = deficit_K
        for (s, &k) in strikes.iter().enumerate() {
            let deficit = call_x(k) - call_y(k);
            let (sign, b) = if deficit >= 0.0 { (1.0, deficit) } else { (-1.0, -deficit) };
            for j in 0..m {
                let c = (self.y_atoms[j] - k).max(0.0);
                if c != 0.0 {
                    push(&mut cols, j, row, sign * c);
                    push(&mut cols, m + j, row, -sign * c);
                }
            }
            push(&mut cols, nv + s, row, -sign);
            rhs.push(b);
            row += 1;
        }

        // cap rows: d+_j - t + u_j = 0  and  d-_j - t + u'_j = 0
        for j in 0..m {
            push(&mut cols, j, row, 1.0);
            push(&mut cols, 2 * m, row, -1.0);
            push(&mut cols, nv + ns + j, row, 1.0);
            rhs.push(0.0);
            row += 1;
            push(&mut cols, m + j, row, 1.0);
            push(&mut cols, 2 * m, row, -1.0);
            push(&mut cols, nv + ns + m + j, row, 1.0);
            rhs.push(0.0);
            row += 1;
        }

        // positivity rows: d-_j - d+_j + z_j = v_j
        for j in 0..m {
            push(&mut cols, m + j, row, 1.0);
            push(&mut cols, j, row, -1.0);
            push(&mut cols, nv + ns + 2 * m + j, row, 1.0);
            rhs.push(self.y_weights[j]);
            row += 1;
        }

        let mut costs = vec![0.0; total];
        costs[2 * m] = 1.0; // minimize t
        let lp = StandardLp { nrows: row as usize, cols, costs, rhs };
        let out = solve_min(&lp).map_err(|e| {
            Error::Infeasible(format!("convex-order repair LP failed: {e}"))
        })?;
        for j in 0..m {
            self.y_weights[j] = (self.y_weights[j] + out.x[j] - out.x[m + j]).max(0.0);
        }
        // remove rounding drift in the total mass
        let s: f64 = self.y_weights.iter().sum();
        for w in &mut self.y_weights {
            *w /= s;
        }
        Ok(())
    }

    /// Runs every instance invariant, named for reporting.
    pub fn check_invariants(&self) -> Vec<InstanceCheck> {
        let mut out = Vec::new();
        let sx: f64 = self.x_weights.iter().sum();
        let sy: f64 = self.y_weights.iter().sum();
        out.push(InstanceCheck {
            name: "weights_sum_to_one",
            pass: (sx - 1.0).abs() <= 1e-12 && (sy - 1.0).abs() <= 1e-12,
            detail: format!("sums {sx:.15} / {sy:.15}"),
        });
        let (mx, my) = (self.mean_x(), self.mean_y());
        out.push(InstanceCheck {
            name: "means_equal",
            pass: (mx - my).abs() <= 1e-9,
            detail: format!("means {mx:.12} / {my:.12}"),
        });
        let (ok, deficit, strike) = self.convex_order_deficit();
        out.push(InstanceCheck {
            name: "discrete_convex_order",
            pass: ok,
            detail: format!("worst deficit {deficit:.3e} at strike {strike:.6}"),
        });
        out
    }

    /// Serializes the instance as plain text (atoms/weights blocks plus the
    /// cost spec or an explicit matrix).
    pub fn to_text(&self) -> String {
        let mut s = String::from("# discrete martingale transport instance\n[x]\n");
        for (a, w) in self.x_atoms.iter().zip(&self.x_weights) {
            s.push_str(&format!("{a} {w}\n"));
        }
        s.push_str("[y]\n");
        for (a, w) in self.y_atoms.iter().zip(&self.y_weights) {
            s.push_str(&format!("{a} {w}\n"));
        }
        s.push_str("[cost]\n");
        match &self.cost_label {
            Some(label) => s.push_str(&format!("payoff {label}\n")),
            None => {
                s.push_str("matrix\n");
                for i in 0..self.n() {
                    let row: Vec<String> = (0..self.m())
                        .map(|j| format!("{}", self.cost[i * self.m() + j]))
                        .collect();
                    s.push_str(&row.join(" "));
                    s.push('\n');
                }
            }
        }
        s
    }

    /// Parses the text format produced by [`Self::to_text`]. Validation is
    /// not rerun here so that deliberately broken fixtures can be loaded and
    /// reported on; call [`Self::check_invariants`] or solve to surface
    /// problems.
    pub fn from_text(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            None,
            X,
            Y,
            Cost,
        }
        let mut section = Section::None;
        let mut xa = Vec::new();
        let mut xw = Vec::new();
        let mut ya = Vec::new();
        let mut yw = Vec::new();
        let mut label: Option<String> = None;
        let mut matrix_rows: Vec<Vec<f64>> = Vec::new();
        let mut in_matrix = false;
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[x]" => {
                    section = Section::X;
                    continue;
                }
                "[y]" => {
                    section = Section::Y;
                    continue;
                }
                "[cost]" => {
                    section = Section::Cost;
                    continue;
                }
                _ => {}
            }
            match section {
                Section::X | Section::Y => {
                    let mut it = line.split_whitespace();
                    let a: f64 = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| Error::BadSpec(format!("bad atom line '{line}'")))?;
                    let w: f64 = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| Error::BadSpec(format!("bad atom line '{line}'")))?;
                    if section == Section::X {
                        xa.push(a);
                        xw.push(w);
                    } else {
                        ya.push(a);
                        yw.push(w);
                    }
                }
                Section::Cost => {
                    if let Some(spec) = line.strip_prefix("payoff ") {
                        label = Some(spec.trim().to_string());
                    } else if line == "matrix" {
                        in_matrix = true;
                    } else if in_matrix {
                        let row: Vec<f64> = line
                            .split_whitespace()
                            .map(|t| t.parse::<f64>())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| Error::BadSpec(format!("bad matrix row '{line}'")))?;
                        matrix_rows.push(row);
                    } else {
                        return Err(Error::BadSpec(format!("unexpected cost line '{line}'")));
                    }
                }
                Section::None => {
                    return Err(Error::BadSpec(format!("data before any section: '{line}'")))
                }
            }
        }
        let (n, m) = (xa.len(), ya.len());
        if n == 0 || m == 0 {
            return Err(Error::BadSpec("instance needs [x] and [y] atoms".into()));
        }
        let cost = if let Some(label) = &label {
            let payoff = Payoff::parse_spec(label)?;
            cost_matrix(&xa, &ya, &payoff)
        } else {
            if matrix_rows.len() != n || matrix_rows.iter().any(|r| r.len() != m) {
                return Err(Error::BadSpec("cost matrix shape mismatch".into()));
            }
            matrix_rows.into_iter().flatten().collect()
        };
        Ok(DiscreteMotInstance {
            x_atoms: xa,
            x_weights: xw,
            y_atoms: ya,
            y_weights: yw,
            cost,
            cost_label: label,
            repaired: false,
        })
    }

    /// The instance transformed by the numeraire change: reciprocal atoms,
    /// reweighted marginals and the transformed cost. The discrete coupling
    /// polytopes map bijectively, so both bounds are invariant.
    pub fn symmetrized(&self) -> Result<DiscreteMotInstance> {
        let (n, m) = (self.n(), self.m());
        let flip = |atoms: &[f64], weights: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let a: Vec<f64> = atoms.iter().rev().map(|&x| 1.0 / x).collect();
            let w: Vec<f64> = atoms
                .iter()
                .zip(weights)
                .rev()
                .map(|(&x, &w)| x * w)
                .collect();
            (a, w)
        };
        let (xa, xw) = flip(&self.x_atoms, &self.x_weights);
        let (ya, yw) = flip(&self.y_atoms, &self.y_weights);
        let mut cost = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                // S*(C)(1/x_i, 1/y_j) = (1/y_j) C(x_i, y_j)
                cost[(n - 1 - i) * m + (m - 1 - j)] =
                    self.cost[i * m + j] / self.y_atoms[j];
            }
        }
        Ok(DiscreteMotInstance {
            x_atoms: xa,
            x_weights: xw,
            y_atoms: ya,
            y_weights: yw,
            cost,
            cost_label: self.cost_label.as_ref().map(|l| format!("S*({l})")),
            repaired: self.repaired,
        })
    }
}

fn cost_matrix(xa: &[f64], ya: &[f64], payoff: &Payoff) -> Vec<f64> {
    let mut cost = Vec::with_capacity(xa.len() * ya.len());
    for &x in xa {
        for &y in ya {
            cost.push(payoff.value(x, y));
        }
    }
    cost
}

/// Semi-static hedge on the atom grid: static positions `phi` (on `x`),
/// `psi` (on `y`) and the forward position `h` (on `x`).
#[derive(Clone, Debug)]
pub struct HedgeTriple {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub h: Vec<f64>,
    /// The optimal basis was degenerate; the dual is one of several.
    pub degenerate: bool,
}

impl HedgeTriple {
    /// Hedge portfolio value `sum phi w + sum psi v`.
    pub fn value(&self, inst: &DiscreteMotInstance) -> f64 {
        let a: f64 = self.phi.iter().zip(&inst.x_weights).map(|(p, w)| p * w).sum();
        let b: f64 = self.psi.iter().zip(&inst.y_weights).map(|(p, w)| p * w).sum();
        a + b
    }
}

/// Solution of one bound direction.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub value: f64,
    /// Joint coupling masses, row-major `n x m`.
    pub coupling: Vec<f64>,
    pub hedge: HedgeTriple,
    pub degenerate: bool,
    pub iterations: usize,
}

/// Solves one direction of the discrete martingale transport problem.
pub fn solve_bounds(inst: &DiscreteMotInstance, direction: Direction) -> Result<LpSolution> {
    inst.validate_shape()?;
    let (n, m) = (inst.n(), inst.m());
    let sign = match direction {
        Direction::Min => 1.0,
        Direction::Max => -1.0,
    };
    let mut cols = Vec::with_capacity(n * m);
    let mut costs = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            cols.push(SparseCol {
                entries: vec![
                    (i as u32, 1.0),
                    ((n + j) as u32, 1.0),
                    ((n + m + i) as u32, inst.y_atoms[j] - inst.x_atoms[i]),
                ],
            });
            costs.push(sign * inst.cost[i * m + j]);
        }
    }
    let mut rhs = Vec::with_capacity(2 * n + m);
    rhs.extend_from_slice(&inst.x_weights);
    rhs.extend_from_slice(&inst.y_weights);
    rhs.extend(std::iter::repeat(0.0).take(n));
    let lp = StandardLp { nrows: 2 * n + m, cols, costs, rhs };
    let out = solve_min(&lp)?;

    let value = sign * out.objective;
    // duals of the max problem are the negated duals of min(-c)
    let lam: Vec<f64> = out.duals.iter().map(|l| sign * l).collect();
    let hedge = HedgeTriple {
        phi: lam[..n].to_vec(),
        psi: lam[n..n + m].to_vec(),
        h: lam[n + m..].to_vec(),
        degenerate: out.degenerate,
    };
    Ok(LpSolution {
        value,
        coupling: out.x,
        hedge,
        degenerate: out.degenerate,
        iterations: out.iterations,
    })
}

/// Solves and returns just the dual hedge of the requested direction.
pub fn extract_dual_hedge(inst: &DiscreteMotInstance, direction: Direction) -> Result<HedgeTriple> {
    solve_bounds(inst, direction).map(|s| s.hedge)
}

/// Outcome of checking a hedge against the replication inequality.
#[derive(Clone, Copy, Debug)]
pub struct HedgeCheck {
    /// Largest violation of the sub/super-replication inequality over all
    /// atom pairs (positive means infeasible there).
    pub max_violation: f64,
    /// Portfolio value of the hedge.
    pub value: f64,
}

/// Verifies `phi_i + psi_j + h_i (y_j - x_i) <= c_ij` (direction `Min`; the
/// reverse for `Max`) on every atom pair.
pub fn check_hedge(
    inst: &DiscreteMotInstance,
    hedge: &HedgeTriple,
    direction: Direction,
) -> HedgeCheck {
    let (n, m) = (inst.n(), inst.m());
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..m {
            let side = hedge.phi[i]
                + hedge.psi[j]
                + hedge.h[i] * (inst.y_atoms[j] - inst.x_atoms[i]);
            let gap = match direction {
                Direction::Min => side - inst.cost[i * m + j],
                Direction::Max => inst.cost[i * m + j] - side,
            };
            worst = worst.max(gap);
        }
    }
    HedgeCheck { max_violation: worst, value: hedge.value(inst) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Marginal;

    fn point_mass_instance() -> DiscreteMotInstance {
        DiscreteMotInstance::new(
            vec![1.0],
            vec![1.0],
            vec![0.5, 1.5],
            vec![0.5, 0.5],
            vec![0.5, 0.5], // |y - x| at x = 1
            Some("straddle2:alpha=1".into()),
        )
        .unwrap()
    }

    #[test]
    fn point_mass_bounds() {
        let inst = point_mass_instance();
        let lo = solve_bounds(&inst, Direction::Min).unwrap();
        let hi = solve_bounds(&inst, Direction::Max).unwrap();
        assert!((lo.value - 0.5).abs() <= 1e-12);
        assert!((hi.value - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn two_by_two_forced_coupling() {
        // martingale constraints force rows (5/6, 1/6) and (1/6, 5/6)
        let xa: Vec<f64> = vec![0.5, 1.5];
        let ya: Vec<f64> = vec![0.25, 1.75];
        let cost: Vec<f64> = xa
            .iter()
            .flat_map(|&x| ya.iter().map(move |&y| (y - x).abs()))
            .collect();
        let inst = DiscreteMotInstance::new(
            xa,
            vec![0.5, 0.5],
            ya,
            vec![0.5, 0.5],
            cost,
            None,
        )
        .unwrap();
        let lo = solve_bounds(&inst, Direction::Min).unwrap();
        let hi = solve_bounds(&inst, Direction::Max).unwrap();
        assert!((lo.value - 5.0 / 12.0).abs() <= 1e-12, "min {}", lo.value);
        assert!((hi.value - 5.0 / 12.0).abs() <= 1e-12, "max {}", hi.value);
        // the coupling itself is pinned
        assert!((lo.coupling[0] - 5.0 / 12.0).abs() <= 1e-10);
        assert!((lo.coupling[1] - 1.0 / 12.0).abs() <= 1e-10);
    }

    fn two_by_three_instance() -> DiscreteMotInstance {
        let xa: Vec<f64> = vec![0.9, 1.1];
        let ya: Vec<f64> = vec![0.5, 1.0, 1.5];
        let cost: Vec<f64> = xa
            .iter()
            .flat_map(|&x| ya.iter().map(move |&y| (y / x - 1.0).abs()))
            .collect();
        DiscreteMotInstance::new(
            xa,
            vec![0.5, 0.5],
            ya,
            vec![0.25, 0.5, 0.25],
            cost,
            Some("straddle1:alpha=1".into()),
        )
        .unwrap()
    }

    #[test]
    fn two_by_three_type_one_bounds() {
        let inst = two_by_three_instance();
        let lo = solve_bounds(&inst, Direction::Min).unwrap();
        let hi = solve_bounds(&inst, Direction::Max).unwrap();
        assert!((lo.value - 134.0 / 495.0).abs() <= 1e-12, "min {}", lo.value);
        assert!((hi.value - 146.0 / 495.0).abs() <= 1e-12, "max {}", hi.value);
    }

    #[test]
    fn duality_and_hedge_feasibility() {
        for inst in [point_mass_instance(), two_by_three_instance()] {
            for dir in [Direction::Min, Direction::Max] {
                let sol = solve_bounds(&inst, dir).unwrap();
                let gap = (sol.hedge.value(&inst) - sol.value).abs();
                assert!(gap <= 1e-8, "duality gap {gap}");
                let check = check_hedge(&inst, &sol.hedge, dir);
                assert!(check.max_violation <= 1e-8, "violation {}", check.max_violation);
            }
        }
    }

    #[test]
    fn hedgeable_cost_has_zero_spread() {
        // cost phi(x) + psi(y): value pins to sums, both directions equal
        let xa = vec![0.8, 1.2];
        let ya = vec![0.5, 1.0, 1.7];
        let phi = |x: f64| (x - 1.0).powi(2);
        let psi = |y: f64| 0.3 * y + 1.0;
        let cost: Vec<f64> = xa
            .iter()
            .flat_map(|&x| ya.iter().map(move |&y| phi(x) + psi(y)))
            .collect();
        // build a feasible pair: y spreads x
        let inst = DiscreteMotInstance::new(
            xa.clone(),
            vec![0.5, 0.5],
            ya.clone(),
            vec![0.26, 0.44, 0.30],
            cost,
            None,
        );
        // means must match here; if they drift the constructor rejects
        if let Ok(inst) = inst {
            let lo = solve_bounds(&inst, Direction::Min).unwrap();
            let hi = solve_bounds(&inst, Direction::Max).unwrap();
            let expected: f64 = xa.iter().map(|&x| 0.5 * phi(x)).sum::<f64>()
                + ya.iter()
                    .zip(&inst.y_weights)
                    .map(|(&y, &w)| w * psi(y))
                    .sum::<f64>();
            assert!((lo.value - expected).abs() <= 1e-10);
            assert!((hi.value - expected).abs() <= 1e-10);
        }
    }

    #[test]
    fn forward_cost_prices_to_zero() {
        let xa: Vec<f64> = vec![0.9, 1.1];
        let ya: Vec<f64> = vec![0.5, 1.0, 1.5];
        let cost: Vec<f64> = xa
            .iter()
            .flat_map(|&x| ya.iter().map(move |&y| y - x))
            .collect();
        let inst = DiscreteMotInstance::new(
            xa,
            vec![0.5, 0.5],
            ya,
            vec![0.25, 0.5, 0.25],
            cost,
            None,
        )
        .unwrap();
        for dir in [Direction::Min, Direction::Max] {
            let sol = solve_bounds(&inst, dir).unwrap();
            assert!(sol.value.abs() <= 1e-9, "forward bound {}", sol.value);
        }
    }

    #[test]
    fn quantize_lognormal_two_cells() {
        let m = Marginal::lognormal(0.2).unwrap();
        let (atoms, weights) = quantize(&m, 2).unwrap();
        assert_eq!(weights, vec![0.5, 0.5]);
        assert!((atoms[0] - 0.8414805811217939).abs() < 1e-9);
        assert!((atoms[1] - 1.158519418878206).abs() < 1e-9);
        let mean: f64 = atoms.iter().zip(&weights).map(|(a, w)| a * w).sum();
        assert!((mean - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn quantize_atoms_passthrough_and_merge() {
        let m = Marginal::atoms(vec![(0.5, 0.5), (1.5, 0.5)]).unwrap();
        let (atoms, weights) = quantize(&m, 4).unwrap();
        assert_eq!(atoms, vec![0.5, 1.5]);
        assert_eq!(weights, vec![0.5, 0.5]);
        // collapse three atoms into two cells preserving the mean
        let m = Marginal::atoms(vec![(0.5, 0.25), (1.0, 0.5), (1.5, 0.25)]).unwrap();
        let (atoms, weights) = quantize(&m, 2).unwrap();
        assert_eq!(weights, vec![0.5, 0.5]);
        let mean: f64 = atoms.iter().zip(&weights).map(|(a, w)| a * w).sum();
        assert!((mean - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn quantize_commutes_with_symmetry_to_first_order() {
        let m = Marginal::lognormal(0.25).unwrap();
        let n = 64;
        let (a1, w1) = quantize(&crate::numeraire::symmetrize_marginal(&m).unwrap(), n).unwrap();
        let q = Marginal::atoms(quantize(&m, n).unwrap().0.into_iter().zip(vec![1.0 / n as f64; n]).collect())
            .unwrap();
        let sq = crate::numeraire::symmetrize_marginal(&q).unwrap();
        let direct = Marginal::atoms(a1.into_iter().zip(w1).collect()).unwrap();
        // equal means exactly, CDFs within O(1/n)
        assert!((direct.mean() - sq.mean()).abs() <= 1e-9);
        let mut worst = 0.0_f64;
        for k in 1..100 {
            let y = 0.5 + k as f64 * 0.015;
            worst = worst.max((direct.cdf(y).unwrap() - sq.cdf(y).unwrap()).abs());
        }
        assert!(worst <= 2.0 / n as f64, "CDF gap {worst}");
    }

    #[test]
    fn symmetric_cuts_are_reciprocal_closed() {
        let mu = Marginal::lognormal(0.2).unwrap();
        let nu = Marginal::lognormal(0.3).unwrap();
        let cuts = symmetric_log_cuts(&mu, &nu, 41).unwrap();
        for (i, &c) in cuts.iter().enumerate() {
            let mirror = cuts[cuts.len() - 1 - i];
            assert!((c * mirror - 1.0).abs() <= 1e-12, "cuts not reciprocal at {i}");
        }
        // quantization of a symmetric marginal is exactly symmetric
        let (a, w) = quantize_cells(&mu, &cuts).unwrap();
        let q = Marginal::atoms_with_tol(a.iter().copied().zip(w.iter().copied()).collect(), 1e-9)
            .unwrap();
        let sq = crate::numeraire::symmetrize_marginal(&q).unwrap();
        let (pa, pw) = q.as_atoms().unwrap();
        let (sa, sw) = sq.as_atoms().unwrap();
        for i in 0..pa.len() {
            assert!((pa[i] - sa[i]).abs() <= 1e-11 * pa[i].max(1.0), "atom {i}");
            assert!((pw[i] - sw[i]).abs() <= 1e-12, "weight {i}");
        }
    }

    #[test]
    fn discrete_numeraire_invariance_of_bounds() {
        let inst = two_by_three_instance();
        let s = inst.symmetrized().unwrap();
        for dir in [Direction::Min, Direction::Max] {
            let a = solve_bounds(&inst, dir).unwrap().value;
            let b = solve_bounds(&s, dir).unwrap().value;
            assert!((a - b).abs() <= 1e-9, "{dir:?}: {a} vs {b}");
        }
    }

    #[test]
    fn transformed_hedge_stays_feasible() {
        // feasible hedge for (inst, C) maps to a feasible hedge for the
        // symmetrized instance
        let inst = two_by_three_instance();
        let sol = solve_bounds(&inst, Direction::Min).unwrap();
        let s = inst.symmetrized().unwrap();
        let n = inst.n();
        let m = inst.m();
        // transform on reciprocal atoms, reversed ordering
        let mut phi = vec![0.0; n];
        let mut h = vec![0.0; n];
        for i in 0..n {
            let x = inst.x_atoms[i];
            phi[n - 1 - i] = sol.hedge.phi[i] / x;
            h[n - 1 - i] = sol.hedge.phi[i] - x * sol.hedge.h[i];
        }
        let mut psi = vec![0.0; m];
        for j in 0..m {
            psi[m - 1 - j] = sol.hedge.psi[j] / inst.y_atoms[j];
        }
        let hedge = HedgeTriple { phi, psi, h, degenerate: false };
        let check = check_hedge(&s, &hedge, Direction::Min);
        assert!(check.max_violation <= 1e-9, "violation {}", check.max_violation);
        // same portfolio value
        assert!((hedge.value(&s) - sol.hedge.value(&inst)).abs() <= 1e-9);
    }

    #[test]
    fn repair_restores_discrete_convex_order() {
        // y weights deliberately skewed so a mid strike violates dominance
        let xa = vec![0.8, 1.2];
        let xw = vec![0.5, 0.5];
        let ya = vec![0.6, 1.0, 1.5];
        // means equal but the call at K = 1.0 fails: too little mass out wide
        let yw = vec![0.15, 0.73, 0.12];
        let my: f64 = ya.iter().zip(&yw).map(|(a, w)| a * w).sum();
        assert!((my - 1.0).abs() < 1e-12);
        let callx = |k: f64| xa.iter().zip(&xw).map(|(&a, &w)| w * (a - k).max(0.0)).sum::<f64>();
        let cally = |k: f64| ya.iter().zip(&yw).map(|(&a, &w)| w * (a - k).max(0.0)).sum::<f64>();
        assert!(callx(1.0) > cally(1.0)); // violated before repair
        let cost = vec![0.0; 6];
        let inst = DiscreteMotInstance::new(xa, xw, ya, yw, cost, None).unwrap();
        assert!(inst.repaired);
        let (ok, deficit, _) = inst.convex_order_deficit();
        assert!(ok, "deficit {deficit} after repair");
        // and it is feasible now
        assert!(solve_bounds(&inst, Direction::Min).is_ok());
    }

    #[test]
    fn text_roundtrip() {
        let inst = two_by_three_instance();
        let text = inst.to_text();
        let back = DiscreteMotInstance::from_text(&text).unwrap();
        assert_eq!(back.x_atoms, inst.x_atoms);
        assert_eq!(back.y_weights, inst.y_weights);
        assert_eq!(back.cost.len(), inst.cost.len());
        for (a, b) in back.cost.iter().zip(&inst.cost) {
            assert!((a - b).abs() <= 1e-15);
        }
        // matrix form
        let mut anon = inst.clone();
        anon.cost_label = None;
        let text = anon.to_text();
        let back = DiscreteMotInstance::from_text(&text).unwrap();
        for (a, b) in back.cost.iter().zip(&anon.cost) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert!(DiscreteMotInstance::from_text("[x]\nnot numbers\n").is_err());
    }
}
