//! Open-system propagation: Strang splitting of the exact unitary step and
//! the exponentiated dissipator.

use super::engine::{check_samples, Diagnostics, Engine, Piece};
use super::pulse::PulseSequence;
use crate::error::{Error, Result};
use crate::linalg::{c, eigh, max_abs, CMat};
use crate::model::TwoTransmon;

/// D(ρ) = Σ L ρ L† − ½{L†L, ρ} with L = √(1/T1)·a_k and √(2/T_φ)·n_k.
///
/// Both operator families are covariant under frames rotating with the
/// excitation number, so the same dissipator applies in every frame used
/// by the engine.
#[derive(Clone, Debug)]
pub struct Dissipator {
    ops: Vec<CMat>,
    ops_dag: Vec<CMat>,
    half_k: CMat,
}

impl Dissipator {
    /// None when the device has no coherence times.
    pub fn new(model: &TwoTransmon) -> Result<Option<Self>> {
        let p = &model.params;
        let mut ops = Vec::new();
        for (coh, a, n) in [(p.coherence_q1, &model.a1, &model.n1), (p.coherence_q2, &model.a2, &model.n2)] {
            let Some(coh) = coh else { continue };
            if coh.t2 > 2.0 * coh.t1 {
                return Err(Error::InvalidParams(vec!["T2 exceeds 2·T1".into()]));
            }
            ops.push(a * c(coh.gamma1().sqrt(), 0.0));
            let gphi = coh.gamma_phi();
            if gphi > 0.0 {
                ops.push(n * c((2.0 * gphi).sqrt(), 0.0));
            }
        }
        if ops.is_empty() {
            return Ok(None);
        }
        let d = model.dim();
        let ops_dag: Vec<CMat> = ops.iter().map(|l| l.adjoint()).collect();
        let mut k = CMat::zeros(d, d);
        for (l, ld) in ops.iter().zip(&ops_dag) {
            k += ld * l;
        }
        Ok(Some(Dissipator { ops, ops_dag, half_k: k * c(0.5, 0.0) }))
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        let mut out = -(&self.half_k * x + x * &self.half_k);
        for (l, ld) in self.ops.iter().zip(&self.ops_dag) {
            out += l * x * ld;
        }
        out
    }

    /// e^{sD}(x) by its Taylor series.
    pub fn exp_apply(&self, x: &CMat, s: f64) -> CMat {
        let scale = max_abs(x).max(1e-300);
        let mut sum = x.clone();
        let mut term = x.clone();
        for k in 1..200 {
            term = self.apply(&term) * c(s / k as f64, 0.0);
            sum += &term;
            if max_abs(&term) < 1e-17 * scale {
                break;
            }
        }
        sum
    }
}

fn conj(u: &CMat, x: &CMat) -> CMat {
    u * x * u.adjoint()
}

fn strang(dis: Option<&Dissipator>, u: &CMat, x: &CMat, h: f64) -> CMat {
    match dis {
        None => conj(u, x),
        Some(d) => d.exp_apply(&conj(u, &d.exp_apply(x, 0.5 * h)), 0.5 * h),
    }
}

/// Result of an open-system propagation.
#[derive(Clone, Debug)]
pub struct DensityEvolution {
    pub final_state: CMat,
    pub samples: Vec<(f64, CMat)>,
    pub diagnostics: Diagnostics,
}

impl Engine {
    fn dissipator(&self) -> Result<Option<Dissipator>> {
        Dissipator::new(self.model())
    }

    /// Evolves reference-frame operators through one piece, stopping at the
    /// given interior times and recording the batch there.
    fn lindblad_piece(
        &self,
        piece: &Piece,
        dis: Option<&Dissipator>,
        xs: &mut [CMat],
        stops: &[f64],
        record: &mut dyn FnMut(f64, &[CMat]),
        diag: &mut Diagnostics,
    ) -> Result<()> {
        match piece {
            Piece::Instant { u, .. } => {
                for x in xs.iter_mut() {
                    *x = conj(u, x);
                }
            }
            Piece::Static { t0, t1, omega_c, eig } => {
                let (t0, t1, wc) = (*t0, *t1, *omega_c);
                let mut fr: Vec<CMat> = xs.iter().map(|x| self.reference_to_frame(x, wc, t0)).collect();
                let mut bounds: Vec<f64> = stops.iter().copied().filter(|&s| s > t0 && s < t1).collect();
                bounds.push(t1);
                let mut left = t0;
                for (i, &right) in bounds.iter().enumerate() {
                    let span = right - left;
                    if span > 0.0 {
                        let n = match dis {
                            None => 1,
                            Some(_) => (span / self.opts.lindblad_step).ceil().max(1.0) as usize,
                        };
                        let h = span / n as f64;
                        let u = eig.propagator(h);
                        for _ in 0..n {
                            fr = fr.iter().map(|x| strang(dis, &u, x, h)).collect();
                        }
                        diag.steps += n;
                    }
                    if i + 1 < bounds.len() {
                        let here: Vec<CMat> = fr.iter().map(|x| self.frame_to_reference(x, wc, right)).collect();
                        record(right, &here);
                    }
                    left = right;
                }
                for (x, f) in xs.iter_mut().zip(fr) {
                    *x = self.frame_to_reference(&f, wc, t1);
                }
            }
            Piece::Stepped { t0, t1, omega_c, gen, data } => {
                let (t0, t1, wc) = (*t0, *t1, *omega_c);
                let mut fr: Vec<CMat> = xs.iter().map(|x| self.reference_to_frame(x, wc, t0)).collect();
                let interior: Vec<f64> = stops.iter().copied().filter(|&s| s > t0 && s < t1).collect();
                let max_h = self.opts.lindblad_step;
                // consecutive integrator steps are merged up to the splitting step
                let mut acc: Option<CMat> = None;
                let mut acc_len = 0.0;
                let flush = |fr: &mut Vec<CMat>, acc: &mut Option<CMat>, acc_len: &mut f64, diag: &mut Diagnostics| {
                    if let Some(u) = acc.take() {
                        *fr = fr.iter().map(|x| strang(dis, &u, x, *acc_len)).collect();
                        diag.steps += 1;
                    }
                    *acc_len = 0.0;
                };
                let mut k = 0;
                for st in &data.steps {
                    let (a, b) = (t0 + st.a, t0 + st.b);
                    let mut cuts = Vec::new();
                    while k < interior.len() && interior[k] <= b {
                        if interior[k] > a {
                            cuts.push(interior[k]);
                        }
                        k += 1;
                    }
                    if cuts.is_empty() {
                        if dis.is_some() && acc_len + (b - a) > max_h {
                            flush(&mut fr, &mut acc, &mut acc_len, diag);
                        }
                        acc = Some(match acc.take() {
                            Some(prev) => &st.u * prev,
                            None => st.u.clone(),
                        });
                        acc_len += b - a;
                    } else {
                        flush(&mut fr, &mut acc, &mut acc_len, diag);
                        let mut left = a;
                        for (i, &cut) in cuts.iter().chain(std::iter::once(&b)).enumerate() {
                            if cut > left {
                                let u = super::engine::integrate(gen, left - t0, cut - t0, self.opts.tol, self.opts.max_steps)?.full;
                                fr = fr.iter().map(|x| strang(dis, &u, x, cut - left)).collect();
                                diag.steps += 1;
                            }
                            if i < cuts.len() {
                                let here: Vec<CMat> = fr.iter().map(|x| self.frame_to_reference(x, wc, cut)).collect();
                                record(cut, &here);
                            }
                            left = cut;
                        }
                    }
                }
                flush(&mut fr, &mut acc, &mut acc_len, diag);
                diag.max_step_error = diag.max_step_error.max(data.max_err);
                for (x, f) in xs.iter_mut().zip(fr) {
                    *x = self.frame_to_reference(&f, wc, t1);
                }
            }
        }
        Ok(())
    }

    fn lindblad_batch(
        &self,
        seq: &PulseSequence,
        inputs: &[CMat],
        samples: &[f64],
        record: &mut dyn FnMut(f64, &[CMat]),
    ) -> Result<(Vec<CMat>, Diagnostics)> {
        let pieces = self.compile(seq)?;
        check_samples(samples, seq.duration())?;
        let dis = self.dissipator()?;
        let mut xs = inputs.to_vec();
        let mut diag = Diagnostics::default();
        let mut next = 0;
        while next < samples.len() && samples[next] <= 0.0 {
            record(samples[next], &xs);
            next += 1;
        }
        for p in &pieces {
            let (a, b) = p.span();
            let mut local = Vec::new();
            let mut end_hits = 0;
            while next < samples.len() && samples[next] <= b && b > a {
                if samples[next] < b {
                    local.push(samples[next]);
                } else {
                    end_hits += 1;
                }
                next += 1;
            }
            self.lindblad_piece(p, dis.as_ref(), &mut xs, &local, record, &mut diag)?;
            for _ in 0..end_hits {
                record(b, &xs);
            }
        }
        while next < samples.len() {
            record(samples[next], &xs);
            next += 1;
        }
        Ok((xs, diag))
    }

    /// Density-matrix evolution in the reference frame.
    pub fn evolve_density(&self, seq: &PulseSequence, rho0: &CMat, samples: &[f64]) -> Result<DensityEvolution> {
        let mut recorded = Vec::with_capacity(samples.len());
        let (xs, mut diag) = self.lindblad_batch(seq, std::slice::from_ref(rho0), samples, &mut |t, x| {
            recorded.push((t, x[0].clone()))
        })?;
        let rho = xs.into_iter().next().expect("one state");
        let tr = crate::linalg::trace(&rho);
        diag.norm_drift = (tr - crate::linalg::trace(rho0)).norm();
        diag.min_eigenvalue = eigh(&rho).values[0];
        Ok(DensityEvolution { final_state: rho, samples: recorded, diagnostics: diag })
    }

    /// Applies the sequence's channel to arbitrary reference-frame operators.
    pub fn apply_channel(&self, seq: &PulseSequence, inputs: &[CMat]) -> Result<(Vec<CMat>, Diagnostics)> {
        self.lindblad_batch(seq, inputs, &[], &mut |_, _| {})
    }
}
