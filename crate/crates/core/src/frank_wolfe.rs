//! Frank-Wolfe with Wolfe away steps for the limit problem, started from the
//! Kumar-Yildirim initialization.
//!
//! Both step types move along `u <- (1 - t) u + t e_p`. The exact line
//! maximizer is `t = (kappa_p - n) / (n (kappa_p - 1))`, positive for forward
//! steps and negative for away steps, where it is clipped at
//! `-u_p / (1 - u_p)` (the drop step). `H` and all `kappa_i` follow by a
//! Sherman-Morrison update in `O(m n)` per iteration.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::colgen::{hp_constant, hp_retain, LimitSolution};
use crate::design::{DesignMatrix, DesignWeights};
use crate::ellipsoid;
use crate::error::{Error, Result};
use crate::linalg;
use crate::report::{Method, ProgressRecord, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwConfig {
    /// Absolute tolerance on `max_i kappa_i - n`; `None` means `1e-5 / n`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub away_steps: bool,
    /// Elimination checkpoint period in iterations; 0 disables.
    pub hp_check_every: usize,
    pub seed: u64,
    pub verbose: bool,
}

impl Default for FwConfig {
    fn default() -> Self {
        FwConfig { tol: None, max_iter: 1_000_000, away_steps: true, hp_check_every: 500, seed: 0, verbose: false }
    }
}

impl FwConfig {
    pub fn tolerance(&self, n: usize) -> f64 {
        self.tol.unwrap_or(1e-5 / n as f64)
    }
}

/// Iterations between refactorizations of `H` and the `kappa` cache.
pub const REFACTOR_EVERY: usize = 1000;

const ZERO_PROJECTION: f64 = 1e-12;

/// Kumar-Yildirim style start: for up to `n` rounds pick the points with
/// largest and smallest projection onto a random direction orthogonal to the
/// span of the points chosen so far, until the chosen points span `R^n`.
/// Every pick carries equal weight; repeated picks are merged.
pub fn ky_init(x: &DesignMatrix, seed: u64) -> Result<DesignWeights> {
    let n = x.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut picks: Vec<usize> = Vec::with_capacity(2 * n);

    for _ in 0..n {
        if basis.len() == n {
            break;
        }
        let mut b: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let c = linalg::dot(&b, q);
                b.iter_mut().zip(q).for_each(|(v, qv)| *v -= c * qv);
            }
        }
        let norm = linalg::dot(&b, &b).sqrt();
        if !(norm > 0.0) {
            break;
        }
        b.iter_mut().for_each(|v| *v /= norm);

        let (mut imax, mut pmax, mut imin, mut pmin) = (0, f64::NEG_INFINITY, 0, f64::INFINITY);
        for (i, p) in x.points().enumerate() {
            let proj = linalg::dot(&b, p);
            if proj > pmax {
                pmax = proj;
                imax = i;
            }
            if proj < pmin {
                pmin = proj;
                imin = i;
            }
        }
        for (i, proj) in [(imax, pmax), (imin, pmin)] {
            let p = x.point(i);
            let scale = linalg::dot(p, p).sqrt();
            if proj.abs() <= ZERO_PROJECTION * scale.max(f64::MIN_POSITIVE) {
                continue;
            }
            picks.push(i);
            let mut r = p.to_vec();
            for _ in 0..2 {
                for q in &basis {
                    let c = linalg::dot(&r, q);
                    r.iter_mut().zip(q).for_each(|(v, qv)| *v -= c * qv);
                }
            }
            let rn = linalg::dot(&r, &r).sqrt();
            if rn > 1e-10 * scale && basis.len() < n {
                r.iter_mut().for_each(|v| *v /= rn);
                basis.push(r);
            }
        }
    }
    if basis.len() < n {
        return Err(Error::RankDeficientData { n, rank: basis.len() });
    }
    DesignWeights::uniform(x.m(), &picks)
}

/// Optimal step along `e_p` from a point with `kappa_p = x_p^T H x_p`.
#[inline]
pub fn optimal_step(kappa: f64, n: usize) -> f64 {
    let nf = n as f64;
    (kappa - nf) / (nf * (kappa - 1.0))
}

/// Change in `ln det` when moving to `(1 - t) u + t e_p`.
#[inline]
pub fn step_gain(kappa: f64, n: usize, t: f64) -> f64 {
    (n as f64 - 1.0) * (1.0 - t).ln() + (1.0 - t + t * kappa).ln()
}

/// Clipped step actually taken on a forward (`t > 0`) or away (`t < 0`) move.
/// Returns the step and whether it drops `p` from the support.
pub fn clipped_step(kappa: f64, n: usize, weight: f64) -> (f64, bool) {
    let nf = n as f64;
    let bound = if weight < 1.0 { -weight / (1.0 - weight) } else { f64::NEG_INFINITY };
    if kappa >= nf {
        return (optimal_step(kappa, n), false);
    }
    if kappa <= 1.0 {
        return (bound, true);
    }
    let t = optimal_step(kappa, n);
    if t <= bound {
        (bound, true)
    } else {
        (t, false)
    }
}

/// Elimination checkpoint: keeps indices whose `kappa` reaches
/// `h_n(max kappa - n)` and anything currently carrying weight.
pub fn fw_hp_checkpoint(active: &[usize], kappas: &[f64], weights: &[f64], n: usize) -> Result<Vec<usize>> {
    let kmax = kappas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = hp_constant((kmax - n as f64).max(0.0), n)?;
    let mut kept = hp_retain(active, kappas, threshold);
    for (&i, &w) in active.iter().zip(weights) {
        if w > 0.0 {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept.dedup();
    Ok(kept)
}

struct State<'a> {
    x: &'a DesignMatrix,
    active: Vec<usize>,
    u: Vec<f64>,
    kappa: Vec<f64>,
    h: DMatrix<f64>,
    log_det: f64,
}

impl<'a> State<'a> {
    fn new(x: &'a DesignMatrix, active: Vec<usize>, init: &DesignWeights) -> Result<Self> {
        let u = active.iter().map(|&i| init.get(i)).collect();
        let mut s = State { x, active, u, kappa: Vec::new(), h: DMatrix::zeros(x.n(), x.n()), log_det: 0.0 };
        s.refactor()?;
        Ok(s)
    }

    /// Rebuilds `H` and every `kappa` from the weights; returns the relative
    /// drift of the maintained `H`.
    fn refactor(&mut self) -> Result<f64> {
        let n = self.x.n();
        let total: f64 = self.u.iter().sum();
        self.u.iter_mut().for_each(|v| *v /= total);
        let mut info = DMatrix::zeros(n, n);
        for (&i, &w) in self.active.iter().zip(&self.u) {
            if w > 0.0 {
                linalg::add_outer(&mut info, self.x.point(i), w);
            }
        }
        linalg::symmetrize(&mut info);
        let l = linalg::cholesky(&info).ok_or(Error::SingularInformation)?;
        let h = linalg::chol_inverse(&l);
        let drift = if self.kappa.is_empty() { 0.0 } else { linalg::rel_diff(&self.h, &h) };
        self.h = h;
        self.log_det = linalg::log_det(&l);
        let mut col = vec![0.0; n];
        self.kappa = self
            .active
            .iter()
            .map(|&i| {
                col.copy_from_slice(self.x.point(i));
                linalg::forward_subst(&l, &mut col);
                linalg::dot(&col, &col)
            })
            .collect();
        Ok(drift)
    }

    fn step(&mut self, pos: usize, t: f64, drop: bool) {
        let n = self.x.n();
        let kp = self.kappa[pos];
        let xp = self.x.point(self.active[pos]);
        let mut w = vec![0.0; n];
        linalg::mat_vec(&self.h, xp, &mut w);
        let c = t / ((1.0 - t) + t * kp);
        let inv = 1.0 / (1.0 - t);
        for (a, &i) in self.active.iter().enumerate() {
            let q = linalg::dot(self.x.point(i), &w);
            self.kappa[a] = (self.kappa[a] - c * q * q) * inv;
        }
        linalg::add_outer(&mut self.h, &w, -c);
        self.h *= inv;
        self.log_det += step_gain(kp, n, t);
        for v in &mut self.u {
            *v *= 1.0 - t;
        }
        self.u[pos] += t;
        if drop {
            self.u[pos] = 0.0;
        }
    }

    fn compact(&mut self, keep: &[usize]) {
        let mut k = 0;
        let mut out = 0;
        for a in 0..self.active.len() {
            if k < keep.len() && keep[k] == self.active[a] {
                self.active[out] = self.active[a];
                self.u[out] = self.u[a];
                self.kappa[out] = self.kappa[a];
                out += 1;
                k += 1;
            }
        }
        self.active.truncate(out);
        self.u.truncate(out);
        self.kappa.truncate(out);
    }

    fn argmax_kappa(&self) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (a, &k) in self.kappa.iter().enumerate() {
            if k > best.1 {
                best = (a, k);
            }
        }
        best
    }

    fn argmin_support_kappa(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (a, (&k, &w)) in self.kappa.iter().zip(&self.u).enumerate() {
            if w > 0.0 && best.is_none_or(|b| k < b.1) {
                best = Some((a, k));
            }
        }
        best
    }

    fn weights(&self) -> Result<DesignWeights> {
        DesignWeights::normalized(self.x.m(), self.active.iter().cloned().zip(self.u.iter().cloned()))
    }
}

/// Frank-Wolfe with away steps until `max_i kappa_i - n <= tol` over all points.
pub fn fw_solve(x: &DesignMatrix, cfg: &FwConfig, init: Option<&DesignWeights>) -> Result<LimitSolution> {
    let start = Instant::now();
    let n = x.n();
    let nf = n as f64;
    let tol = cfg.tolerance(n);
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let init = match init {
        Some(w) => w.clone(),
        None => ky_init(x, cfg.seed)?,
    };
    if init.m() != x.m() {
        return Err(Error::DimensionMismatch { expected: x.m(), found: init.m() });
    }

    let mut st = State::new(x, (0..x.m()).collect(), &init)?;
    let mut eliminated: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut max_drift = 0.0f64;
    let mut last_objective = st.log_det;
    let mut it = 0usize;
    let mut since_refactor = 0usize;

    let mut last_check = 0usize;

    let converged = loop {
        if cfg.hp_check_every > 0 && it > 0 && it.is_multiple_of(cfg.hp_check_every) && last_check != it {
            last_check = it;
            let keep = fw_hp_checkpoint(&st.active, &st.kappa, &st.u, n)?;
            if keep.len() < st.active.len() {
                let mut k = 0;
                for &i in &st.active {
                    if k < keep.len() && keep[k] == i {
                        k += 1;
                    } else {
                        eliminated.push(i);
                    }
                }
                eliminated.sort_unstable();
                st.compact(&keep);
            }
        }

        let (imax, kmax) = st.argmax_kappa();
        if kmax - nf <= tol {
            // confirm on fresh quantities, then on the eliminated points
            st.refactor()?;
            since_refactor = 0;
            let (_, kmax) = st.argmax_kappa();
            if kmax - nf <= tol {
                let w = st.weights()?;
                let h = ellipsoid::ellipsoid_from_weights(x, &w)?;
                let ek = h.kappas(x, &eliminated);
                let back: Vec<usize> =
                    eliminated.iter().zip(&ek).filter(|&(_, &k)| k - nf > tol).map(|(&i, _)| i).collect();
                if back.is_empty() {
                    break true;
                }
                eliminated.retain(|i| back.binary_search(i).is_err());
                let mut active = st.active.clone();
                active.extend(&back);
                active.sort_unstable();
                st = State::new(x, active, &w)?;
            }
            continue;
        }
        if it >= cfg.max_iter {
            break false;
        }

        let forward_gap = kmax - nf;
        let away = if cfg.away_steps { st.argmin_support_kappa() } else { None };
        match away {
            Some((jpos, kmin)) if nf - kmin > forward_gap => {
                let (t, drop) = clipped_step(kmin, n, st.u[jpos]);
                st.step(jpos, t, drop);
            }
            _ => {
                let t = optimal_step(st.kappa[imax], n);
                st.step(imax, t, false);
            }
        }
        debug_assert!(st.log_det >= last_objective - 1e-9);
        last_objective = st.log_det;
        it += 1;
        since_refactor += 1;

        if since_refactor >= REFACTOR_EVERY {
            max_drift = max_drift.max(st.refactor()?);
            since_refactor = 0;
            let record = ProgressRecord {
                iteration: it,
                active: st.active.len(),
                working: st.u.iter().filter(|&&w| w > 0.0).count(),
                violation: (st.argmax_kappa().1 - nf).max(0.0),
                objective: st.log_det,
                gap: ellipsoid::gap_from_kappa(st.argmax_kappa().1, n),
            };
            if cfg.verbose {
                record.emit();
            }
            history.push(record);
        }
    };

    let weights = st.weights()?;
    let h = ellipsoid::ellipsoid_from_weights(x, &weights)?;
    let cert = ellipsoid::certificate_for(x, &h, None);
    let report = SolveReport {
        method: Method::FrankWolfe,
        objective: -h.log_det(),
        duality_gap: cert.gap,
        violation: (cert.kappa_max - nf).max(0.0),
        iterations: it,
        support_size: weights.support().len(),
        eliminated: eliminated.len(),
        working_set: st.active.len(),
        wall_time: start.elapsed().as_secs_f64(),
        converged,
    };
    let record = ProgressRecord {
        iteration: it,
        active: st.active.len(),
        working: report.support_size,
        violation: report.violation,
        objective: report.objective,
        gap: report.duality_gap,
    };
    if cfg.verbose {
        record.emit();
    }
    history.push(record);
    let sol = LimitSolution { weights, ellipsoid: h, report, history, eliminated, max_refactor_drift: max_drift };
    if converged {
        Ok(sol)
    } else {
        Err(Error::IterationLimit(Box::new(sol)))
    }
}
