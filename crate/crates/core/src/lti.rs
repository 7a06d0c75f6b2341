//! Real-coefficient polynomials, SISO transfer functions and state-space
//! realizations.
//!
//! Polynomials store coefficients highest degree first, which is also the
//! order used by the scenario config files.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default margin for strict "real part < 0" tests.
pub const DEFAULT_STAB_MARGIN: f64 = 1e-9;

pub type Complex64 = Complex<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Polynomial {
    type Error = String;

    fn try_from(coeffs: Vec<f64>) -> std::result::Result<Self, String> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err("polynomial coefficients must be finite".into());
        }
        Ok(Polynomial::new(coeffs))
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    /// Builds a polynomial from descending coefficients, dropping exact
    /// leading zeros. An empty list is the zero polynomial.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let first = coeffs.iter().position(|&c| c != 0.0);
        match first {
            Some(i) => Polynomial {
                coeffs: coeffs[i..].to_vec(),
            },
            None => Polynomial::zero(),
        }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial { coeffs: vec![c] }
    }

    /// Monic polynomial with the given roots. Complex roots should come in
    /// conjugate pairs; the imaginary residue of the expansion is dropped.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (i, c) in acc.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c * r;
            }
            acc = next;
        }
        Polynomial::new(acc.into_iter().map(|c| c.re).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[0]
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn scale(&self, k: f64) -> Self {
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Divides through by the leading coefficient. Never applied implicitly.
    pub fn monic(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let mut m = self.scale(1.0 / self.leading());
        m.coeffs[0] = 1.0;
        Ok(m)
    }

    pub fn add(&self, other: &Polynomial) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (slot, c) in out[n - self.coeffs.len()..].iter_mut().zip(&self.coeffs) {
            *slot += c;
        }
        for (slot, c) in out[n - other.coeffs.len()..].iter_mut().zip(&other.coeffs) {
            *slot += c;
        }
        Polynomial::new(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Polynomial product. Operands are put in a canonical order first so
    /// that `p.mul(q)` and `q.mul(p)` agree bit for bit.
    pub fn mul(&self, other: &Polynomial) -> Self {
        let (p, q) = match canonical_cmp(&self.coeffs, &other.coeffs) {
            Ordering::Greater => (other, self),
            _ => (self, other),
        };
        let mut out = vec![0.0; p.coeffs.len() + q.coeffs.len() - 1];
        for (i, a) in p.coeffs.iter().enumerate() {
            for (j, b) in q.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    /// Euclidean division: returns `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Polynomial) -> Result<(Polynomial, Polynomial)> {
        if divisor.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        if self.degree() < divisor.degree() || self.is_zero() {
            return Ok((Polynomial::zero(), self.clone()));
        }
        let mut rem = self.coeffs.clone();
        let dl = divisor.leading();
        let qlen = self.degree() - divisor.degree() + 1;
        let mut quot = vec![0.0; qlen];
        for i in 0..qlen {
            let f = rem[i] / dl;
            quot[i] = f;
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[i + j] -= f * d;
            }
            rem[i] = 0.0;
        }
        let rem = rem[qlen..].to_vec();
        Ok((Polynomial::new(quot), Polynomial::new(rem)))
    }
}

fn canonical_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    })
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_coeffs(f, &self.coeffs)
    }
}

pub(crate) fn write_coeffs(f: &mut impl fmt::Write, coeffs: &[f64]) -> fmt::Result {
    write!(f, "[")?;
    for (i, c) in coeffs.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{}", fmt_num(*c))?;
    }
    write!(f, "]")
}

/// Shortest representation for integers, 9 significant digits otherwise.
pub fn fmt_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{:.8e}", x)
    }
}

/// Ratio of two real polynomials. Kept unreduced unless [`TransferFunction::reduce`]
/// is called explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub num: Polynomial,
    pub den: Polynomial,
}

impl TransferFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(TransferFunction { num, den })
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn gain(k: f64) -> Self {
        TransferFunction {
            num: Polynomial::constant(k),
            den: Polynomial::constant(1.0),
        }
    }

    /// `deg(den) - deg(num)`; negative for improper transfer functions.
    pub fn relative_degree(&self) -> i64 {
        self.den.degree() as i64 - self.num.degree() as i64
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree() >= 0
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        poly_roots(&self.num)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        poly_roots(&self.den)
    }

    /// True iff every zero lies strictly left of `-margin`. A zero numerator
    /// has no meaningful zero set and reports false.
    pub fn is_minimum_phase(&self, margin: f64) -> bool {
        if self.num.is_zero() {
            return false;
        }
        match self.zeros() {
            Ok(z) => is_hurwitz(&z, margin),
            Err(_) => false,
        }
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.num.eval_complex(s) / self.den.eval_complex(s)
    }

    /// Parallel connection `a + b`, unreduced.
    pub fn add(&self, other: &TransferFunction) -> TransferFunction {
        let num = self.num.mul(&other.den).add(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        TransferFunction { num, den }
    }

    /// Swaps numerator and denominator.
    pub fn reciprocal(&self) -> Result<TransferFunction> {
        TransferFunction::new(self.den.clone(), self.num.clone())
    }

    /// Cancels pole/zero pairs closer than `tol` and rebuilds both
    /// polynomials from the surviving roots.
    pub fn reduce(&self, tol: f64) -> Result<TransferFunction> {
        if self.num.is_zero() {
            return Ok(TransferFunction {
                num: Polynomial::zero(),
                den: Polynomial::constant(1.0),
            });
        }
        let mut zeros = self.zeros()?;
        let mut poles = self.poles()?;
        let mut i = 0;
        while i < zeros.len() {
            if let Some(j) = poles.iter().position(|p| (p - zeros[i]).norm() <= tol) {
                poles.swap_remove(j);
                zeros.swap_remove(i);
            } else {
                i += 1;
            }
        }
        let num = Polynomial::from_roots(&zeros).scale(self.num.leading());
        let den = Polynomial::from_roots(&poles).scale(self.den.leading());
        TransferFunction::new(num, den)
    }

    /// Controllable canonical realization. Biproper inputs put the
    /// high-frequency gain into the feedthrough term.
    pub fn to_ss(&self) -> Result<StateSpace> {
        if !self.is_proper() {
            return Err(Error::Improper {
                num: self.num.degree(),
                den: self.den.degree(),
            });
        }
        let den = self.den.monic()?;
        let num = self.num.scale(1.0 / self.den.leading());
        let n = den.degree();
        let (d0, strict) = if num.degree() == n && !num.is_zero() {
            let d0 = num.leading();
            let rest: Vec<f64> = num.coeffs()[1..]
                .iter()
                .zip(&den.coeffs()[1..])
                .map(|(a, b)| a - d0 * b)
                .collect();
            (d0, Polynomial::new(rest))
        } else {
            (0.0, num)
        };
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, 1);
        let mut c = DMatrix::zeros(1, n);
        if n > 0 {
            for i in 0..n - 1 {
                a[(i, i + 1)] = 1.0;
            }
            // den = s^n + a1 s^(n-1) + ... + an; last row holds -an ... -a1
            for (k, coef) in den.coeffs()[1..].iter().enumerate() {
                a[(n - 1, n - 1 - k)] = -coef;
            }
            b[(n - 1, 0)] = 1.0;
            let sc = strict.coeffs();
            // strict part has degree < n; its s^k coefficient maps to c[k]
            if !strict.is_zero() {
                for (k, coef) in sc.iter().rev().enumerate() {
                    c[(0, k)] = *coef;
                }
            }
        }
        let d = DMatrix::from_element(1, 1, d0);
        StateSpace::with_feedthrough(a, b, c, d)
    }
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "num: {}, den: {}", self.num, self.den)
    }
}

/// `dx = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl StateSpace {
    /// Strictly proper system (`D = 0`).
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let d = DMatrix::zeros(c.nrows(), b.ncols());
        Self::with_feedthrough(a, b, c, d)
    }

    pub fn with_feedthrough(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "B has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!(
                "C has {} columns, expected {n}",
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        Ok(StateSpace { a, b, c, d })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn nstates(&self) -> usize {
        self.a.nrows()
    }
    pub fn ninputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn noutputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_siso(&self) -> bool {
        self.ninputs() == 1 && self.noutputs() == 1
    }

    pub fn has_feedthrough(&self) -> bool {
        self.d.iter().any(|&x| x != 0.0)
    }

    /// Transfer function `C (sI - A)^-1 B + D` by the Faddeev-LeVerrier
    /// recursion. Leading numerator coefficients at rounding level are
    /// dropped so the relative degree comes out right.
    pub fn to_tf(&self) -> Result<TransferFunction> {
        if !self.is_siso() {
            return Err(Error::NotSiso {
                inputs: self.ninputs(),
                outputs: self.noutputs(),
            });
        }
        let n = self.nstates();
        let ident = DMatrix::<f64>::identity(n, n);
        let mut den = Vec::with_capacity(n + 1);
        den.push(1.0);
        let mut markov = Vec::with_capacity(n);
        let mut scale = Vec::with_capacity(n);
        let mut m_prev = DMatrix::<f64>::zeros(n, n);
        let mut c_prev = 1.0;
        let cb_norm = self.c.norm() * self.b.norm();
        for k in 1..=n {
            let mk = &self.a * &m_prev + &ident * c_prev;
            markov.push((&self.c * &mk * &self.b)[(0, 0)]);
            scale.push(cb_norm * mk.norm());
            let ck = -(&self.a * &mk).trace() / k as f64;
            den.push(ck);
            c_prev = ck;
            m_prev = mk;
        }
        let lead = markov
            .iter()
            .zip(&scale)
            .position(|(v, s)| v.abs() > 64.0 * f64::EPSILON * s)
            .unwrap_or(markov.len());
        let num = Polynomial::new(markov[lead..].to_vec());
        let den = Polynomial::new(den);
        let num = num.add(&den.scale(self.d[(0, 0)]));
        TransferFunction::new(num, den)
    }

    /// Cascade where `upstream`'s output drives this system's input. The
    /// state vector is ordered `[self; upstream]`.
    pub fn driven_by(&self, upstream: &StateSpace) -> Result<StateSpace> {
        if upstream.noutputs() != self.ninputs() {
            return Err(Error::Dimension(format!(
                "upstream has {} outputs, downstream expects {} inputs",
                upstream.noutputs(),
                self.ninputs()
            )));
        }
        let (n1, n2) = (self.nstates(), upstream.nstates());
        let n = n1 + n2;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((0, n1), (n1, n2))
            .copy_from(&(&self.b * &upstream.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&upstream.a);
        let mut b = DMatrix::zeros(n, upstream.ninputs());
        b.view_mut((0, 0), (n1, upstream.ninputs()))
            .copy_from(&(&self.b * &upstream.d));
        b.view_mut((n1, 0), (n2, upstream.ninputs()))
            .copy_from(&upstream.b);
        let mut c = DMatrix::zeros(self.noutputs(), n);
        c.view_mut((0, 0), (self.noutputs(), n1)).copy_from(&self.c);
        c.view_mut((0, n1), (self.noutputs(), n2))
            .copy_from(&(&self.d * &upstream.c));
        let d = &self.d * &upstream.d;
        StateSpace::with_feedthrough(a, b, c, d)
    }

    /// Parallel connection with shared input and summed outputs, states
    /// ordered `[self; other]`.
    pub fn parallel(&self, other: &StateSpace) -> Result<StateSpace> {
        if self.ninputs() != other.ninputs() || self.noutputs() != other.noutputs() {
            return Err(Error::Dimension(
                "parallel connection needs matching input and output counts".into(),
            ));
        }
        let (n1, n2) = (self.nstates(), other.nstates());
        let n = n1 + n2;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = DMatrix::zeros(n, self.ninputs());
        b.view_mut((0, 0), (n1, self.ninputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.ninputs()))
            .copy_from(&other.b);
        let mut c = DMatrix::zeros(self.noutputs(), n);
        c.view_mut((0, 0), (self.noutputs(), n1)).copy_from(&self.c);
        c.view_mut((0, n1), (self.noutputs(), n2))
            .copy_from(&other.c);
        StateSpace::with_feedthrough(a, b, c, &self.d + &other.d)
    }
}

/// Full spectrum of a square real matrix, with multiplicity.
///
/// The matrix is balanced (diagonal similarity, powers of two) before the
/// real Schur decomposition.
pub fn eig(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "matrix has non-finite entries".into(),
        ));
    }
    let balanced = balance(m.clone());
    Ok(balanced.complex_eigenvalues().iter().copied().collect())
}

fn balance(mut a: DMatrix<f64>) -> DMatrix<f64> {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= inv;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
        if done {
            return a;
        }
    }
}

/// All roots of `p` with multiplicity, as eigenvalues of its companion
/// matrix. Exact trailing zero coefficients become exact zero roots.
pub fn poly_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let c = p.coeffs();
    let nz = c.iter().rev().take_while(|&&x| x == 0.0).count();
    let core = &c[..c.len() - nz];
    let n = core.len() - 1;
    let mut roots = vec![Complex64::new(0.0, 0.0); nz];
    if n == 0 {
        return Ok(roots);
    }
    let lead = core[0];
    let mut comp = DMatrix::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -core[j + 1] / lead;
    }
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    roots.extend(eig(&comp)?);
    Ok(roots)
}

/// True iff every entry has real part strictly below `-margin`.
pub fn is_hurwitz(roots: &[Complex64], margin: f64) -> bool {
    roots.iter().all(|r| r.re < -margin)
}

/// Sorts roots by real part, then imaginary part, for stable output.
pub fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}
