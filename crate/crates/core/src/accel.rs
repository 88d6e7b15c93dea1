//! Sequence acceleration: the Shanks transform, Wynn's epsilon algorithm,
//! the auxiliary alternating series and its coupling with a sequence to be
//! extrapolated.
//!
//! Vector-valued sequences are accelerated componentwise.

use std::ops::Deref;

use nalgebra::DVector;

use crate::error::{PitaError, Result};
use crate::model::StateVector;

/// Default small-denominator guard of the epsilon recursion.
pub const DEFAULT_GUARD: f64 = 1e-12;

/// A non-empty sequence of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSequence(Vec<f64>);

impl RealSequence {
    pub fn new(terms: Vec<f64>) -> Result<Self> {
        if terms.is_empty() {
            return Err(PitaError::InsufficientTerms {
                required: 1,
                available: 0,
            });
        }
        check_finite(&terms)?;
        Ok(RealSequence(terms))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for RealSequence {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_finite(terms: &[f64]) -> Result<()> {
    if terms.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(PitaError::NonFiniteEntry { field: "sequence" })
    }
}

/// First-order Shanks transform of three consecutive terms.
pub fn shanks(s0: f64, s1: f64, s2: f64) -> Result<f64> {
    shanks_with_guard(s0, s1, s2, DEFAULT_GUARD)
}

pub fn shanks_with_guard(s0: f64, s1: f64, s2: f64, guard: f64) -> Result<f64> {
    let denominator = s0 + s2 - 2.0 * s1;
    let scale = 1f64.max(s0.abs()).max(s1.abs()).max(s2.abs());
    if denominator.abs() <= guard * scale {
        return Err(PitaError::DegenerateDenominator { denominator });
    }
    Ok((s0 * s2 - s1 * s1) / denominator)
}

/// Triangular table of the epsilon recursion
/// `e[k+1][n] = e[k-1][n+1] + 1 / (e[k][n+1] - e[k][n])`
/// with `e[-1][n] = 0` and `e[0][n] = S_n`.
///
/// Even columns hold the extrapolants; odd columns are intermediate and not
/// exposed. When a difference falls below the guard the entry is copied
/// from `e[k-1][n+1]` and flagged.
#[derive(Debug, Clone)]
pub struct EpsilonTable {
    columns: Vec<Vec<f64>>,
    guarded: Vec<Vec<bool>>,
}

impl EpsilonTable {
    pub fn build(seq: &[f64], guard: f64) -> Result<Self> {
        if seq.is_empty() {
            return Err(PitaError::InsufficientTerms {
                required: 1,
                available: 0,
            });
        }
        check_finite(seq)?;
        if !(guard >= 0.0) || !guard.is_finite() {
            return Err(PitaError::InvalidArgument(format!(
                "guard {guard} must be finite and non-negative"
            )));
        }

        let len = seq.len();
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(len);
        let mut guarded: Vec<Vec<bool>> = Vec::with_capacity(len);
        columns.push(seq.to_vec());
        guarded.push(vec![false; len]);
        let minus_one = vec![0.0; len + 1];

        for c in 1..len {
            let prev = &columns[c - 1];
            let before: &[f64] = if c == 1 { &minus_one } else { &columns[c - 2] };
            let mut col = Vec::with_capacity(len - c);
            let mut flags = Vec::with_capacity(len - c);
            for i in 0..len - c {
                let diff = prev[i + 1] - prev[i];
                if diff.abs() <= guard * (1.0 + prev[i].abs()) {
                    col.push(before[i + 1]);
                    flags.push(true);
                } else {
                    col.push(before[i + 1] + 1.0 / diff);
                    flags.push(false);
                }
            }
            columns.push(col);
            guarded.push(flags);
        }
        Ok(EpsilonTable { columns, guarded })
    }

    /// Length of the input sequence.
    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of entries in column `c` (`len - c`, or 0 past the apex).
    pub fn column_len(&self, c: usize) -> usize {
        self.columns.get(c).map_or(0, Vec::len)
    }

    /// Even column `k` (the order-`k` extrapolants); `None` for odd `k` or
    /// past the apex.
    pub fn even_column(&self, k: usize) -> Option<&[f64]> {
        if !k.is_multiple_of(2) {
            return None;
        }
        self.columns.get(k).map(Vec::as_slice)
    }

    /// `e[k][n]` for even `k`.
    pub fn extrapolant(&self, k: usize, n: usize) -> Option<f64> {
        self.even_column(k).and_then(|c| c.get(n).copied())
    }

    /// Whether entry `(c, n)` of any column came from the guard path.
    pub fn is_guarded(&self, c: usize, n: usize) -> bool {
        self.guarded
            .get(c)
            .and_then(|f| f.get(n))
            .copied()
            .unwrap_or(false)
    }

    pub fn any_guarded(&self) -> bool {
        self.guarded.iter().flatten().any(|&g| g)
    }
}

/// Which reading of the auxiliary series to use.
///
/// `Literal`: `S_b0 + (-1)^n * n / (n+1)^q` (summand constant in the inner
/// index). `Alternate`: `S_b0 + (-1)^n * sum_{j=1..n} 1/(j+1)^q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AuxForm {
    #[default]
    Literal,
    Alternate,
}

/// Parameters of the auxiliary alternating series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxSeriesParams {
    s_b0: f64,
    q: f64,
    form: AuxForm,
}

impl AuxSeriesParams {
    pub fn new(s_b0: f64, q: f64) -> Result<Self> {
        Self::with_form(s_b0, q, AuxForm::Literal)
    }

    pub fn with_form(s_b0: f64, q: f64, form: AuxForm) -> Result<Self> {
        if !s_b0.is_finite() {
            return Err(PitaError::InvalidArgument("S_b0 must be finite".into()));
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(PitaError::InvalidArgument(format!(
                "q = {q} must be positive"
            )));
        }
        Ok(AuxSeriesParams { s_b0, q, form })
    }

    pub fn s_b0(&self) -> f64 {
        self.s_b0
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn form(&self) -> AuxForm {
        self.form
    }

    /// Same series with a different damping exponent.
    pub fn with_q(&self, q: f64) -> Result<Self> {
        Self::with_form(self.s_b0, q, self.form)
    }

    /// The first `len` terms.
    pub fn terms(&self, len: usize) -> Vec<f64> {
        (0..len).map(|n| aux_series_term(self, n)).collect()
    }
}

/// Term `n` of the auxiliary alternating series.
pub fn aux_series_term(p: &AuxSeriesParams, n: usize) -> f64 {
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let magnitude = match p.form {
        AuxForm::Literal => n as f64 / ((n + 1) as f64).powf(p.q),
        AuxForm::Alternate => (1..=n).map(|j| ((j + 1) as f64).powf(-p.q)).sum(),
    };
    p.s_b0 + sign * magnitude
}

/// Parameters of one extrapolation: order `k` (even), start index `n`,
/// scaling `rho`, optional auxiliary series and the denominator guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelSpec {
    k: usize,
    n: usize,
    rho: f64,
    aux: Option<AuxSeriesParams>,
    denom_guard: f64,
}

impl Default for AccelSpec {
    /// `k = 4`, `n = 2`, `rho = 1`, no auxiliary series.
    fn default() -> Self {
        AccelSpec {
            k: 4,
            n: 2,
            rho: 1.0,
            aux: None,
            denom_guard: DEFAULT_GUARD,
        }
    }
}

impl AccelSpec {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        if !k.is_multiple_of(2) {
            return Err(PitaError::OddOrder { k });
        }
        Ok(AccelSpec {
            k,
            n,
            ..Default::default()
        })
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(PitaError::InvalidArgument(format!(
                "rho = {rho} must be positive"
            )));
        }
        self.rho = rho;
        Ok(self)
    }

    pub fn with_aux(mut self, aux: Option<AuxSeriesParams>) -> Self {
        self.aux = aux;
        self
    }

    pub fn with_guard(mut self, guard: f64) -> Result<Self> {
        if !(guard >= 0.0) || !guard.is_finite() {
            return Err(PitaError::InvalidArgument(format!(
                "guard {guard} must be non-negative"
            )));
        }
        self.denom_guard = guard;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn aux(&self) -> Option<&AuxSeriesParams> {
        self.aux.as_ref()
    }

    pub fn denom_guard(&self) -> f64 {
        self.denom_guard
    }

    /// Terms consumed by this spec, `n + k + 1`.
    pub fn terms_needed(&self) -> usize {
        self.n + self.k + 1
    }

    fn require(&self, available: usize) -> Result<()> {
        let required = self.terms_needed();
        if available < required {
            return Err(PitaError::InsufficientTerms {
                required,
                available,
            });
        }
        Ok(())
    }
}

/// Terms `S_n ... S_{n+k}` needed for an order-`k` extrapolant.
pub fn terms_needed(k: usize, n: usize) -> Result<usize> {
    if !k.is_multiple_of(2) {
        return Err(PitaError::OddOrder { k });
    }
    Ok(n + k + 1)
}

/// The order-`k` extrapolant `e[k][n]` of `seq`.
pub fn s_epsilon(spec: &AccelSpec, seq: &[f64]) -> Result<f64> {
    spec.require(seq.len())?;
    // e[k][n] only depends on S_n ..= S_{n+k}.
    let window = &seq[spec.n..spec.n + spec.k + 1];
    let table = EpsilonTable::build(window, spec.denom_guard)?;
    Ok(table
        .extrapolant(spec.k, 0)
        .expect("window holds exactly k + 1 terms"))
}

/// Extrapolates `omega` coupled with an explicit auxiliary sequence:
/// `(S_eps(rho * omega + aux) - S_eps(aux)) / rho`.
pub fn accelerate_coupled(spec: &AccelSpec, omega: &[f64], aux_terms: &[f64]) -> Result<f64> {
    spec.require(omega.len())?;
    if aux_terms.len() != omega.len() {
        return Err(PitaError::DimensionMismatch {
            field: "aux",
            expected: omega.len(),
            found: aux_terms.len(),
        });
    }
    let coupled: Vec<f64> = omega
        .iter()
        .zip(aux_terms)
        .map(|(w, a)| spec.rho * w + a)
        .collect();
    let coupled_limit = s_epsilon(spec, &coupled)?;
    let aux_limit = s_epsilon(spec, aux_terms)?;
    Ok((coupled_limit - aux_limit) / spec.rho)
}

/// [`accelerate_coupled`] with the spec's own auxiliary series.
pub fn accelerate_with_aux(spec: &AccelSpec, omega: &[f64]) -> Result<f64> {
    let aux = spec.aux.ok_or_else(|| {
        PitaError::InvalidArgument("accelerate_with_aux needs auxiliary series parameters".into())
    })?;
    accelerate_coupled(spec, omega, &aux.terms(omega.len()))
}

/// Componentwise acceleration of a sequence of state vectors, with the
/// auxiliary coupling when the spec carries one.
pub fn vector_accelerate(spec: &AccelSpec, seq: &[StateVector]) -> Result<StateVector> {
    spec.require(seq.len())?;
    let d = seq[0].dim();
    if let Some(bad) = seq.iter().find(|s| s.dim() != d) {
        return Err(PitaError::DimensionMismatch {
            field: "sequence",
            expected: d,
            found: bad.dim(),
        });
    }
    let aux_terms = spec.aux.map(|a| a.terms(seq.len()));
    let mut out = DVector::zeros(d);
    let mut component = vec![0.0; seq.len()];
    for c in 0..d {
        for (slot, s) in component.iter_mut().zip(seq) {
            *slot = s[c];
        }
        out[c] = match &aux_terms {
            Some(aux) => accelerate_coupled(spec, &component, aux)?,
            None => s_epsilon(spec, &component)?,
        };
    }
    StateVector::from_vector(out)
}
