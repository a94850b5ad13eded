//! Kernels, multi-scale weights and the constants of the asymptotic covariance.
//!
//! Weights generated from a kernel `𝔎` use `h = 𝔎″` in
//!
//! ```text
//! α_i = (i/M²) h(i/M) − (i/(2M³)) h′(i/M) + (i/(6M⁴)) (h′(1) − h′(0)) − (i/(24M⁵)) (h″(1) − h″(0))
//! ```
//!
//! followed by an exact projection onto `Σα_i = 1`, `Σα_i/i = 0` along the span
//! of `{i/M², 1/i}`. The constants are the finite-M versions of
//!
//! ```text
//! 𝔑₁ = M³ Σ α_i²/i²
//! 𝔑₂ = M Σ_{j=1}^{M−1} (Σ_{i>j} α_i/i)²
//! 𝔇  = M⁻¹ Σ_k Σ_{l≤k} (l/6)(3 − l/k) α_k α_l
//! 𝔐  = M Σ_{i,r} α_i α_r (i∧r)/(i r)
//! ```
//!
//! For the cubic kernel they tend to `(12, 6/5, 13/70, 6/5)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CovestError, Result};

/// Step used for central-difference first derivatives of user kernels.
pub const FD_STEP: f64 = 1e-5;

/// Step used for second differences, where a larger step limits cancellation.
pub const FD_STEP_SECOND: f64 = 1e-4;

type KernelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum KernelKind {
    Cubic,
    Parzen,
    TukeyHanning(u32),
    Custom(KernelFn),
}

/// A kernel `𝔎` on `[0, 1]` with its first two derivatives.
#[derive(Clone)]
pub struct KernelFunction {
    name: String,
    kind: KernelKind,
}

impl fmt::Debug for KernelFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelFunction")
            .field("name", &self.name)
            .finish()
    }
}

fn central_diff(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn second_diff(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

impl KernelFunction {
    /// The cubic kernel `1 − 3x² + 2x³`.
    pub fn cubic() -> Self {
        Self {
            name: "cubic".into(),
            kind: KernelKind::Cubic,
        }
    }

    /// The Parzen kernel.
    pub fn parzen() -> Self {
        Self {
            name: "parzen".into(),
            kind: KernelKind::Parzen,
        }
    }

    /// The `r`-th Tukey–Hanning kernel `sin²(π/2 (1 − x)^r)`.
    pub fn tukey_hanning(r: u32) -> Result<Self> {
        if r == 0 {
            return Err(CovestError::InvalidParameter(
                "Tukey-Hanning order must be at least 1".into(),
            ));
        }
        Ok(Self {
            name: format!("th{r}"),
            kind: KernelKind::TukeyHanning(r),
        })
    }

    /// A user kernel; derivatives are taken by central differences with steps
    /// [`FD_STEP`] (first order) and [`FD_STEP_SECOND`] (second order).
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            kind: KernelKind::Custom(Arc::new(f)),
        }
    }

    /// Kernel name (`cubic`, `parzen`, `th<r>` or the user-supplied name).
    pub fn name(&self) -> &str {
        &self.name
    }

    /// True for kernels evaluated in closed form.
    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, KernelKind::Custom(_))
    }

    /// `𝔎(x)`.
    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            KernelKind::Cubic => 1.0 - 3.0 * x * x + 2.0 * x * x * x,
            KernelKind::Parzen => {
                if x <= 0.5 {
                    1.0 - 6.0 * x * x + 6.0 * x * x * x
                } else {
                    2.0 * (1.0 - x).powi(3)
                }
            }
            KernelKind::TukeyHanning(r) => {
                let s = (0.5 * PI * (1.0 - x).powi(*r as i32)).sin();
                s * s
            }
            KernelKind::Custom(f) => f(x),
        }
    }

    /// `𝔎′(x)`.
    pub fn d1(&self, x: f64) -> f64 {
        match &self.kind {
            KernelKind::Cubic => -6.0 * x + 6.0 * x * x,
            KernelKind::Parzen => {
                if x <= 0.5 {
                    -12.0 * x + 18.0 * x * x
                } else {
                    -6.0 * (1.0 - x).powi(2)
                }
            }
            KernelKind::TukeyHanning(r) => {
                let (phi, dphi, _) = th_phase(*r, x);
                (2.0 * phi).sin() * dphi
            }
            KernelKind::Custom(f) => central_diff(f.as_ref(), x, FD_STEP),
        }
    }

    /// `𝔎″(x)`.
    pub fn d2(&self, x: f64) -> f64 {
        match &self.kind {
            KernelKind::Cubic => -6.0 + 12.0 * x,
            KernelKind::Parzen => {
                if x <= 0.5 {
                    -12.0 + 36.0 * x
                } else {
                    12.0 * (1.0 - x)
                }
            }
            KernelKind::TukeyHanning(r) => {
                let (phi, dphi, ddphi) = th_phase(*r, x);
                2.0 * (2.0 * phi).cos() * dphi * dphi + (2.0 * phi).sin() * ddphi
            }
            KernelKind::Custom(f) => second_diff(f.as_ref(), x, FD_STEP_SECOND),
        }
    }

    /// `𝔎‴(x)`.
    pub fn d3(&self, x: f64) -> f64 {
        match &self.kind {
            KernelKind::Cubic => 12.0,
            KernelKind::Parzen => {
                if x <= 0.5 {
                    36.0
                } else {
                    -12.0
                }
            }
            _ => central_diff(&|y| self.d2(y), x, FD_STEP),
        }
    }

    /// `𝔎⁗(x)`.
    pub fn d4(&self, x: f64) -> f64 {
        match &self.kind {
            KernelKind::Cubic | KernelKind::Parzen => 0.0,
            _ => second_diff(&|y| self.d2(y), x, FD_STEP_SECOND),
        }
    }
}

/// Phase `φ = (π/2)(1 − x)^r` of the Tukey–Hanning kernel and its first two derivatives in `x`.
fn th_phase(r: u32, x: f64) -> (f64, f64, f64) {
    let u = 1.0 - x;
    let rf = r as f64;
    let phi = 0.5 * PI * u.powi(r as i32);
    let dphi = -0.5 * PI * rf * u.powi(r as i32 - 1);
    let ddphi = if r >= 2 {
        0.5 * PI * rf * (rf - 1.0) * u.powi(r as i32 - 2)
    } else {
        0.0
    };
    (phi, dphi, ddphi)
}

/// Looks up a built-in kernel: `cubic`, `parzen`, `th<r>` or `tukey_hanning(<r>)`.
pub fn builtin_kernel(name: &str) -> Result<KernelFunction> {
    let key = name.trim().to_ascii_lowercase();
    match key.as_str() {
        "cubic" => return Ok(KernelFunction::cubic()),
        "parzen" => return Ok(KernelFunction::parzen()),
        _ => {}
    }
    let order = key
        .strip_prefix("th")
        .or_else(|| {
            key.strip_prefix("tukey_hanning(")
                .and_then(|s| s.strip_suffix(')'))
        })
        .and_then(|s| s.parse::<u32>().ok());
    match order {
        Some(r) if r >= 1 => KernelFunction::tukey_hanning(r),
        _ => Err(CovestError::UnknownKernel(name.to_string())),
    }
}

/// Weight vector `α_1, …, α_M` of a multi-scale estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightScheme {
    alphas: Vec<f64>,
    c: Option<f64>,
    kernel: String,
    end_adjusted: bool,
}

impl WeightScheme {
    /// Wraps an explicit weight vector.
    pub fn from_alphas(alphas: Vec<f64>, kernel: impl Into<String>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(CovestError::InvalidParameter(
                "weights must be nonempty".into(),
            ));
        }
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(CovestError::InvalidParameter(
                "weights must be finite".into(),
            ));
        }
        Ok(Self {
            alphas,
            c: None,
            kernel: kernel.into(),
            end_adjusted: false,
        })
    }

    /// Weights `α_1, …, α_M`.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Multi-scale frequency `M`.
    pub fn m(&self) -> usize {
        self.alphas.len()
    }

    /// Tuning constant `c` with `M = round(c √N)`, when recorded.
    pub fn c(&self) -> Option<f64> {
        self.c
    }

    /// Records the tuning constant.
    pub fn with_c(mut self, c: f64) -> Self {
        self.c = Some(c);
        self
    }

    /// Name of the generating kernel.
    pub fn kernel(&self) -> &str {
        &self.kernel
    }

    /// True after [`end_effect_adjust`].
    pub fn end_adjusted(&self) -> bool {
        self.end_adjusted
    }

    /// `Σ α_i`.
    pub fn sum(&self) -> f64 {
        self.alphas.iter().sum()
    }

    /// `Σ α_i / i`.
    pub fn sum_over_index(&self) -> f64 {
        self.alphas
            .iter()
            .enumerate()
            .map(|(i, a)| a / (i + 1) as f64)
            .sum()
    }
}

/// Exact weights `α_i = 12i²/(M³−M) − 6i/(M²−1) − 6i/(M³−M)`.
pub fn cubic_weights(m: usize) -> Result<WeightScheme> {
    if m < 2 {
        return Err(CovestError::InvalidParameter(format!(
            "cubic weights need M ≥ 2, got {m}"
        )));
    }
    let mf = m as f64;
    let d3 = mf * mf * mf - mf;
    let d2 = mf * mf - 1.0;
    let alphas = (1..=m)
        .map(|i| {
            let x = i as f64;
            12.0 * x * x / d3 - 6.0 * x / d2 - 6.0 * x / d3
        })
        .collect();
    WeightScheme::from_alphas(alphas, "cubic")
}

/// Composite Simpson rule on `[0, 1]` with `2k` panels.
fn simpson(f: impl Fn(f64) -> f64, k: usize) -> f64 {
    let n = 2 * k;
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(j as f64 * h);
    }
    s * h / 3.0
}

/// Corrects weights along `{i/M², 1/i}` so that `Σα = 1` and `Σα/i = 0` hold exactly.
fn project_constraints(alphas: &mut [f64]) {
    let m = alphas.len() as f64;
    for _ in 0..3 {
        let (mut su, mut sv, mut su_i, mut sv_i) = (0.0, 0.0, 0.0, 0.0);
        let (mut s, mut s_i) = (0.0, 0.0);
        for (k, a) in alphas.iter().enumerate() {
            let i = (k + 1) as f64;
            let u = i / (m * m);
            let v = 1.0 / i;
            su += u;
            sv += v;
            su_i += u / i;
            sv_i += v / i;
            s += a;
            s_i += a / i;
        }
        let (r1, r2) = (1.0 - s, -s_i);
        let det = su * sv_i - sv * su_i;
        let a = (r1 * sv_i - sv * r2) / det;
        let b = (su * r2 - su_i * r1) / det;
        for (k, x) in alphas.iter_mut().enumerate() {
            let i = (k + 1) as f64;
            *x += a * i / (m * m) + b / i;
        }
    }
}

/// Weights generated from a kernel with `h = 𝔎″`, projected onto the constraints.
pub fn weights_from_kernel(kernel: &KernelFunction, m: usize) -> Result<WeightScheme> {
    if m < 2 {
        return Err(CovestError::InvalidParameter(format!(
            "weights need M ≥ 2, got {m}"
        )));
    }
    let moment1 = simpson(|x| x * kernel.d2(x), 1000);
    let moment0 = simpson(|x| kernel.d2(x), 1000);
    if (moment1 - 1.0).abs() > 1e-6 || moment0.abs() > 1e-6 {
        return Err(CovestError::KernelCondition(format!(
            "{}: ∫x h = {moment1:.3e} (want 1), ∫h = {moment0:.3e} (want 0)",
            kernel.name()
        )));
    }
    let mf = m as f64;
    let dh = kernel.d3(1.0) - kernel.d3(0.0);
    let ddh = kernel.d4(1.0) - kernel.d4(0.0);
    let mut alphas: Vec<f64> = (1..=m)
        .map(|i| {
            let x = i as f64;
            let u = x / mf;
            x / mf.powi(2) * kernel.d2(u) - x / (2.0 * mf.powi(3)) * kernel.d3(u)
                + x / (6.0 * mf.powi(4)) * dh
                - x / (24.0 * mf.powi(5)) * ddh
        })
        .collect();
    project_constraints(&mut alphas);
    WeightScheme::from_alphas(alphas, kernel.name())
}

/// Weights named by kernel: exact cubic weights for `cubic`, kernel-generated otherwise.
pub fn weights_for(kernel: &KernelFunction, m: usize) -> Result<WeightScheme> {
    if kernel.name() == "cubic" && kernel.is_builtin() {
        cubic_weights(m)
    } else {
        weights_from_kernel(kernel, m)
    }
}

/// End-effect correction `α₁ ↦ α₁ + 2/n`, `α₂ ↦ α₂ − 2/n`.
pub fn end_effect_adjust(w: &WeightScheme, n: usize) -> Result<WeightScheme> {
    if w.m() < 2 {
        return Err(CovestError::InvalidParameter(
            "end-effect adjustment needs M ≥ 2".into(),
        ));
    }
    if n == 0 {
        return Err(CovestError::InvalidParameter("n must be positive".into()));
    }
    let mut out = w.clone();
    out.alphas[0] += 2.0 / n as f64;
    out.alphas[1] -= 2.0 / n as f64;
    out.end_adjusted = true;
    Ok(out)
}

/// Finite-M constants `𝔑₁, 𝔑₂, 𝔇, 𝔐` of a weight scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub n1: f64,
    pub n2: f64,
    pub d: f64,
    pub m_const: f64,
}

/// Evaluates the finite-M constants of a weight scheme.
pub fn kernel_constants(w: &WeightScheme) -> KernelConstants {
    let a = w.alphas();
    let m = a.len();
    let mf = m as f64;
    let n1 = mf.powi(3)
        * a.iter()
            .enumerate()
            .map(|(k, x)| x * x / ((k + 1) as f64).powi(2))
            .sum::<f64>();

    // tail[j] = Σ_{i>j} α_i/i for j = 0..M
    let mut tail = vec![0.0; m + 1];
    for j in (0..m).rev() {
        tail[j] = tail[j + 1] + a[j] / (j + 1) as f64;
    }
    let n2 = mf * tail[1..m].iter().map(|t| t * t).sum::<f64>();

    let mut d = 0.0;
    for k in 1..=m {
        let kf = k as f64;
        let mut inner = 0.0;
        for l in 1..=k {
            let lf = l as f64;
            inner += lf / 6.0 * (3.0 - lf / kf) * a[l - 1];
        }
        d += a[k - 1] * inner;
    }
    d /= mf;

    // Σ_{i,r} α_i α_r (i∧r)/(ir) = Σ_i α_i/i Σ_r α_r (i∧r)/r
    // and Σ_r α_r (i∧r)/r = Σ_{r≤i} α_r + i Σ_{r>i} α_r/r.
    let mut head = 0.0;
    let mut m_sum = 0.0;
    for i in 1..=m {
        head += a[i - 1];
        let inner = head + i as f64 * tail[i];
        m_sum += a[i - 1] / i as f64 * inner;
    }
    KernelConstants {
        n1,
        n2,
        d,
        m_const: mf * m_sum,
    }
}
