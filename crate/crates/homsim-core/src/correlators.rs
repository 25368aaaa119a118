//! Single-emitter emission correlators on the simulation grids.
//!
//! For every emission node t_k three regression seeds evolve together in
//! the delay direction under the emitter's own master equation:
//!
//!   M_a(0) = rho(t_k) sigma_dag      first-order coherence,
//!   M_b(0) = sigma rho(t_k) sigma_dag  intensity autocorrelation,
//!   M_c(0) = rho(t_k)                delayed population,
//!
//! giving the readouts
//!
//!   G1(t_k, tau) = gamma <sigma_dag(t_k) sigma(t_k + tau)> = gamma (M_a)_eg,
//!   G2(t_k, tau) = gamma^2 <sigma_dag n(t_k + tau) sigma>  = gamma^2 (M_b)_ee,
//!   N(t_k + tau)                                           = gamma (M_c)_ee.
//!
//! Rows are integrated numerically only while t_k + tau lies inside the
//! drive pulse. Past the pulse support all three readouts evolve in closed
//! form (a phase-rotating exponential for G1, plain decay for the other
//! two), so only a short delay prefix is stored; values beyond it follow
//! from the last stored column and the free-evolution factors.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::ode::{self, OdeOptions, State};
use crate::tls::{master_rhs, EmitterSpec, LindbladParams, PulseSpec, TlsError};

/// Dense row-major 2-D array; rows are contiguous.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid2<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid2<T> {
    pub fn filled(nrows: usize, ncols: usize, value: T) -> Self {
        Grid2 {
            nrows,
            ncols,
            data: vec![value; nrows * ncols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            assert_eq!(row.len(), ncols, "ragged rows");
            data.extend(row);
        }
        Grid2 { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, k: usize) -> &[T] {
        &self.data[k * self.ncols..(k + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [T] {
        &mut self.data[k * self.ncols..(k + 1) * self.ncols]
    }

    pub fn get(&self, k: usize, j: usize) -> &T {
        &self.data[k * self.ncols + j]
    }
}

/// Emission observables of one driven emitter: the photon flux N(t) on the
/// full emission grid and the two-time correlators on the stored delay
/// prefix. `frame_detuning` records the rotating-frame offset (the laser
/// detuning) needed to phase-align sets of different emitters.
#[derive(Debug, Clone)]
pub struct CorrelatorSet {
    pub emitter: EmitterSpec,
    pub pulse: PulseSpec,
    time: Arc<TimeGrid>,
    delay: Arc<TimeGrid>,
    prefix: usize,
    pub n_of_t: Vec<f64>,
    pub g1: Grid2<C64>,
    pub g2: Grid2<f64>,
    pub n_delayed: Grid2<f64>,
    pub frame_detuning: f64,
    /// Integration accuracy this set was computed with; reused when a
    /// delayed copy has to be recomputed during assembly.
    pub opts: OdeOptions,
}

impl CorrelatorSet {
    pub fn time(&self) -> &Arc<TimeGrid> {
        &self.time
    }

    pub fn delay(&self) -> &Arc<TimeGrid> {
        &self.delay
    }

    /// Number of stored delay columns.
    pub fn prefix_len(&self) -> usize {
        self.prefix
    }

    pub fn shares_grids(&self, other: &CorrelatorSet) -> bool {
        (Arc::ptr_eq(&self.time, &other.time) || self.time == other.time)
            && (Arc::ptr_eq(&self.delay, &other.delay) || self.delay == other.delay)
            && self.prefix == other.prefix
    }

    /// Free-evolution factor of G1 over an extra delay `dt` past the prefix.
    pub fn g1_tail(&self, dt: f64) -> C64 {
        (C64::new(-self.emitter.coherence_rate(), self.frame_detuning) * dt).exp()
    }

    /// Free-evolution factor of G2 and N over an extra delay `dt`.
    pub fn pop_tail(&self, dt: f64) -> f64 {
        (-self.emitter.gamma * dt).exp()
    }

    /// Mean photon number per pulse, int N(t) dt.
    pub fn mean_photon_number(&self) -> f64 {
        self.time
            .weights()
            .iter()
            .zip(&self.n_of_t)
            .map(|(w, n)| w * n)
            .sum()
    }
}

type RowData = (Vec<C64>, Vec<f64>, Vec<f64>);

/// Compute the correlator set of one emitter driven by one pulse, starting
/// from the ground state before the pulse. `prefix_span` selects how much
/// of the delay grid is stored; it must reach past the pulse support from
/// every emission node.
pub fn compute(
    emitter: &EmitterSpec,
    pulse: &PulseSpec,
    time: &Arc<TimeGrid>,
    delay: &Arc<TimeGrid>,
    prefix_span: f64,
    opts: &OdeOptions,
) -> Result<CorrelatorSet> {
    emitter.validate()?;
    pulse.validate()?;
    if delay.first() != 0.0 {
        return Err(Error::GridMismatch(format!(
            "delay grid must start at zero, got {}",
            delay.first()
        )));
    }
    let pend = pulse.support_end();
    let tol = 1e-9 * (1.0 + pend.abs());
    if time.first() > pulse.support_start() + tol {
        return Err(Error::GridMismatch(format!(
            "time grid starts at {} inside the pulse support (from {})",
            time.first(),
            pulse.support_start()
        )));
    }
    let prefix = delay.prefix_len(prefix_span);
    if prefix < 2 {
        return Err(Error::GridMismatch(format!(
            "delay prefix span {prefix_span} holds fewer than two nodes"
        )));
    }
    let taus = &delay.nodes()[..prefix];
    if time.first() + taus[prefix - 1] < pend - tol {
        return Err(Error::GridMismatch(format!(
            "delay prefix ends at {} but the pulse support ends at {}",
            time.first() + taus[prefix - 1],
            pend
        )));
    }

    let params = LindbladParams::of(emitter);
    let gamma = emitter.gamma;

    // population sweep along emission time, retaining the full state at
    // every node as the seed of that node's delay row
    let sweep_rhs = master_rhs::<1>(params, *pulse);
    let t0 = time.first().min(pulse.support_start());
    let ground = State([[
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
    ]]);
    let mut rho_t: Vec<[C64; 4]> = vec![[C64::new(0.0, 0.0); 4]; time.len()];
    ode::integrate_sampled(&sweep_rhs, t0, time.nodes(), ground, opts, |i, y| {
        rho_t[i] = y.0[0]
    })
    .map_err(TlsError::from)?;

    for (k, rho) in rho_t.iter().enumerate() {
        let trace = (rho[0] + rho[3]).re;
        if (trace - 1.0).abs() > 1e-6 || rho[3].re < -1e-8 {
            return Err(TlsError::InvalidState(format!(
                "population sweep lost physicality at node {k} (trace {trace})"
            ))
            .into());
        }
    }
    let n_of_t: Vec<f64> = rho_t.iter().map(|r| gamma * r[3].re).collect();

    let rows: Vec<RowData> = (0..time.len())
        .into_par_iter()
        .map(|k| correlator_row(emitter, pulse, time.nodes()[k], &rho_t[k], taus, opts))
        .collect::<std::result::Result<_, TlsError>>()?;

    let mut g1_rows = Vec::with_capacity(rows.len());
    let mut g2_rows = Vec::with_capacity(rows.len());
    let mut nd_rows = Vec::with_capacity(rows.len());
    for (a, b, c) in rows {
        g1_rows.push(a);
        g2_rows.push(b);
        nd_rows.push(c);
    }

    Ok(CorrelatorSet {
        emitter: emitter.clone(),
        pulse: *pulse,
        time: Arc::clone(time),
        delay: Arc::clone(delay),
        prefix,
        n_of_t,
        g1: Grid2::from_rows(g1_rows),
        g2: Grid2::from_rows(g2_rows),
        n_delayed: Grid2::from_rows(nd_rows),
        frame_detuning: emitter.laser_detuning,
        opts: *opts,
    })
}

/// One delay row: numeric through the remaining pulse, closed form after.
fn correlator_row(
    emitter: &EmitterSpec,
    pulse: &PulseSpec,
    t_k: f64,
    rho: &[C64; 4],
    taus: &[f64],
    opts: &OdeOptions,
) -> std::result::Result<RowData, TlsError> {
    let n = taus.len();
    let mut g1 = vec![C64::new(0.0, 0.0); n];
    let mut g2 = vec![0.0; n];
    let mut nd = vec![0.0; n];

    let gamma = emitter.gamma;
    let gamma_sq = gamma * gamma;
    let gcoh = emitter.coherence_rate();
    let delta = emitter.laser_detuning;
    let coherence_tail = |dt: f64| (C64::new(-gcoh, delta) * dt).exp();

    let pend = pulse.support_end();
    let tol = 1e-12 * (1.0 + pend.abs());

    if t_k >= pend - tol {
        // never driven again: everything from rho(t_k) directly
        let nee = rho[3].re;
        for (j, &tau) in taus.iter().enumerate() {
            g1[j] = gamma * nee * coherence_tail(tau);
            nd[j] = gamma * nee * (-gamma * tau).exp();
        }
        return Ok((g1, g2, nd));
    }

    let zero = C64::new(0.0, 0.0);
    let seeds = State([
        [rho[1], zero, rho[3], zero], // rho sigma_dag
        [rho[3], zero, zero, zero],   // sigma rho sigma_dag
        *rho,                         // rho itself
    ]);

    let split = taus.partition_point(|&tau| t_k + tau <= pend + tol);
    let samples: Vec<f64> = taus[..split].iter().map(|&tau| t_k + tau).collect();
    let rhs = master_rhs::<3>(LindbladParams::of(emitter), *pulse);
    let at_last = ode::integrate_sampled(&rhs, t_k, &samples, seeds, opts, |j, y| {
        g1[j] = gamma * y.0[0][2];
        g2[j] = gamma_sq * y.0[1][3].re;
        nd[j] = gamma * y.0[2][3].re;
    })?;

    if split < n {
        let at_end = ode::integrate(&rhs, samples[split - 1], pend, at_last, opts)?;
        let (c_g1, c_g2, c_nd) = (at_end.0[0][2], at_end.0[1][3].re, at_end.0[2][3].re);
        for j in split..n {
            let dt = t_k + taus[j] - pend;
            g1[j] = gamma * c_g1 * coherence_tail(dt);
            g2[j] = gamma_sq * c_g2 * (-gamma * dt).exp();
            nd[j] = gamma * c_nd * (-gamma * dt).exp();
        }
    }
    Ok((g1, g2, nd))
}
