//! Truncated linear convolution of nonnegative sequences.
//!
//! Small problems use the direct double loop; larger ones use zero-padded
//! real FFTs. FFT round-off can produce tiny negative values where the exact
//! result is 0 or below `1e-16·scale`; these are clamped to 0.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ConvolutionMethod {
    /// Direct below a work threshold, FFT above.
    #[default]
    Auto,
    Direct,
    Fft,
}

/// Work (multiply-adds) below which `Auto` convolves directly.
const DIRECT_WORK: usize = 1 << 18;

struct Plan {
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

/// Convolution engine with a fixed right operand (the increment pmf) whose
/// spectra are cached per transform size.
pub(crate) struct Convolver {
    kernel: Vec<f64>,
    method: ConvolutionMethod,
    planner: RealFftPlanner<f64>,
    plans: HashMap<usize, Plan>,
    spectra: HashMap<usize, Vec<Complex64>>,
}

impl Convolver {
    pub(crate) fn new(kernel: Vec<f64>, method: ConvolutionMethod) -> Self {
        Self {
            kernel,
            method,
            planner: RealFftPlanner::new(),
            plans: HashMap::new(),
            spectra: HashMap::new(),
        }
    }

    /// `(prev * kernel)[i]` for `i < out_len`.
    pub(crate) fn step(&mut self, prev: &[f64], out_len: usize) -> Vec<f64> {
        let prev = &prev[..prev.len().min(out_len)];
        let kernel_len = self.kernel.len().min(out_len);
        if prev.is_empty() || out_len == 0 {
            return vec![0.0; out_len];
        }
        let direct = match self.method {
            ConvolutionMethod::Direct => true,
            ConvolutionMethod::Fft => false,
            ConvolutionMethod::Auto => prev.len().saturating_mul(kernel_len) / 2 <= DIRECT_WORK,
        };
        if direct {
            direct_truncated(prev, &self.kernel[..kernel_len], out_len)
        } else {
            self.fft_step(prev, out_len)
        }
    }

    fn plan(&mut self, size: usize) -> &Plan {
        let planner = &mut self.planner;
        self.plans.entry(size).or_insert_with(|| Plan {
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        })
    }

    fn fft_step(&mut self, prev: &[f64], out_len: usize) -> Vec<f64> {
        let size = (prev.len() + out_len.min(self.kernel.len()) - 1).next_power_of_two().max(2);
        if !self.spectra.contains_key(&size) {
            let take = out_len.min(self.kernel.len()).min(size);
            let kernel = std::mem::take(&mut self.kernel);
            let spec = forward(self.plan(size), &kernel[..take], size);
            self.kernel = kernel;
            self.spectra.clear();
            self.spectra.insert(size, spec);
        }
        let mut spec = forward(self.plan(size), prev, size);
        let kernel_spec = &self.spectra[&size];
        for (a, b) in spec.iter_mut().zip(kernel_spec) {
            *a *= *b;
        }
        let mut out = inverse(self.plan(size), &mut spec, size);
        out.truncate(out_len);
        clamp_nonnegative(&mut out);
        out
    }
}

fn forward(plan: &Plan, data: &[f64], size: usize) -> Vec<Complex64> {
    let mut buf = vec![0.0; size];
    buf[..data.len()].copy_from_slice(data);
    let mut spec = plan.forward.make_output_vec();
    plan.forward
        .process(&mut buf, &mut spec)
        .expect("buffer sizes match the plan");
    spec
}

fn inverse(plan: &Plan, spec: &mut [Complex64], size: usize) -> Vec<f64> {
    // the imaginary parts at DC and Nyquist are zero up to round-off
    spec[0].im = 0.0;
    if let Some(last) = spec.last_mut() {
        last.im = 0.0;
    }
    let mut out = plan.inverse.make_output_vec();
    plan.inverse.process(spec, &mut out).expect("buffer sizes match the plan");
    let scale = 1.0 / size as f64;
    out.iter_mut().for_each(|x| *x *= scale);
    out
}

fn clamp_nonnegative(xs: &mut [f64]) {
    for x in xs.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Direct truncated convolution.
pub fn direct_truncated(a: &[f64], b: &[f64], out_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    for (i, &x) in a.iter().enumerate().take(out_len) {
        if x == 0.0 {
            continue;
        }
        let span = (out_len - i).min(b.len());
        for (o, &y) in out[i..i + span].iter_mut().zip(&b[..span]) {
            *o += x * y;
        }
    }
    out
}

/// `kernel^{*n}` truncated to `len` entries, by binary powering with real FFTs.
///
/// Truncation is exact for the retained entries because all indices are
/// nonnegative. Peak memory is about five transform-size buffers of `f64`.
pub fn truncated_power(kernel: &[f64], n: u64, len: usize, method: ConvolutionMethod) -> Result<Vec<f64>> {
    if n == 0 {
        let mut out = vec![0.0; len];
        if len > 0 {
            out[0] = 1.0;
        }
        return Ok(out);
    }
    if len == 0 {
        return Ok(Vec::new());
    }
    let mut base: Vec<f64> = kernel.iter().copied().take(len).collect();
    base.resize(len, 0.0);
    let use_fft = match method {
        ConvolutionMethod::Direct => false,
        ConvolutionMethod::Fft => true,
        ConvolutionMethod::Auto => len > 512,
    };
    if !use_fft {
        let mut acc: Option<Vec<f64>> = None;
        let mut e = n;
        loop {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(r) => direct_truncated(&r, &base, len),
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = direct_truncated(&base, &base, len);
        }
        return Ok(acc.expect("n ≥ 1"));
    }
    let size = (2 * len - 1).next_power_of_two().max(2);
    if size > 1 << 28 {
        return Err(LabError::Resource {
            what: format!("convolution power needs transforms of size {size}"),
            suggestion: format!("a coordinate bound below {}", 1usize << 27),
        });
    }
    let mut planner = RealFftPlanner::<f64>::new();
    let plan = Plan {
        forward: planner.plan_fft_forward(size),
        inverse: planner.plan_fft_inverse(size),
    };
    let mut acc: Option<Vec<f64>> = None;
    let mut e = n;
    let mut buf = vec![0.0; size];
    loop {
        buf[..len].copy_from_slice(&base);
        buf[len..].iter_mut().for_each(|x| *x = 0.0);
        let mut base_spec = plan.forward.make_output_vec();
        plan.forward.process(&mut buf, &mut base_spec).expect("sizes match");
        if e & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(mut r) => {
                    buf[..len].copy_from_slice(&r);
                    buf[len..].iter_mut().for_each(|x| *x = 0.0);
                    let mut spec = plan.forward.make_output_vec();
                    plan.forward.process(&mut buf, &mut spec).expect("sizes match");
                    for (a, b) in spec.iter_mut().zip(&base_spec) {
                        *a *= *b;
                    }
                    inverse_into(&plan, &mut spec, &mut buf, size);
                    r.copy_from_slice(&buf[..len]);
                    clamp_nonnegative(&mut r);
                    r
                }
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        for a in base_spec.iter_mut() {
            *a = *a * *a;
        }
        inverse_into(&plan, &mut base_spec, &mut buf, size);
        base.copy_from_slice(&buf[..len]);
        clamp_nonnegative(&mut base);
    }
    Ok(acc.expect("n ≥ 1"))
}

fn inverse_into(plan: &Plan, spec: &mut [Complex64], out: &mut [f64], size: usize) {
    spec[0].im = 0.0;
    if let Some(last) = spec.last_mut() {
        last.im = 0.0;
    }
    plan.inverse.process(spec, out).expect("sizes match");
    let scale = 1.0 / size as f64;
    out.iter_mut().for_each(|x| *x *= scale);
}
