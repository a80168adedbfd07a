//! Function libraries and sparse symbolic models over them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A scalar function with no registered derivatives.
#[derive(Clone)]
pub struct CustomFn {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl CustomFn {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFn")
            .field("name", &self.name)
            .finish()
    }
}

/// One library term.
#[derive(Debug, Clone)]
pub enum Basis {
    /// `x^p`
    Monomial(u32),
    /// `sin(w x)`
    Sin(f64),
    /// `cos(w x)`
    Cos(f64),
    /// Opaque function; evaluable but not differentiable.
    Custom(CustomFn),
}

impl Basis {
    pub fn name(&self) -> String {
        match self {
            Basis::Monomial(0) => "1".to_string(),
            Basis::Monomial(1) => "x".to_string(),
            Basis::Monomial(p) => format!("x^{p}"),
            Basis::Sin(w) => format!("sin({w}*x)"),
            Basis::Cos(w) => format!("cos({w}*x)"),
            Basis::Custom(c) => c.name.clone(),
        }
    }

    /// Parses the names produced by [`Basis::name`]; custom terms cannot be
    /// reconstructed from a name.
    pub fn parse(name: &str) -> Result<Self> {
        let s = name.trim();
        if s == "1" {
            return Ok(Basis::Monomial(0));
        }
        if s == "x" {
            return Ok(Basis::Monomial(1));
        }
        if let Some(p) = s.strip_prefix("x^") {
            return p
                .parse::<u32>()
                .map(Basis::Monomial)
                .map_err(|_| Error::Parse(format!("bad monomial `{s}`")));
        }
        let freq = |inner: &str| -> Result<f64> {
            inner
                .strip_suffix("*x)")
                .and_then(|w| w.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("bad trigonometric term `{s}`")))
        };
        if let Some(rest) = s.strip_prefix("sin(") {
            return Ok(Basis::Sin(freq(rest)?));
        }
        if let Some(rest) = s.strip_prefix("cos(") {
            return Ok(Basis::Cos(freq(rest)?));
        }
        Err(Error::Parse(format!("unknown library term `{s}`")))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Basis::Monomial(p) => x.powi(*p as i32),
            Basis::Sin(w) => (w * x).sin(),
            Basis::Cos(w) => (w * x).cos(),
            Basis::Custom(c) => (c.f)(x),
        }
    }

    /// Analytic derivative of order 0, 1 or 2.
    pub fn derivative(&self, x: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(Error::UnsupportedModel(format!(
                "derivative order {order} (at most 2 supported)"
            )));
        }
        Ok(match (self, order) {
            (_, 0) => self.eval(x),
            (Basis::Monomial(p), 1) => match p {
                0 => 0.0,
                p => *p as f64 * x.powi(*p as i32 - 1),
            },
            (Basis::Monomial(p), _) => match p {
                0 | 1 => 0.0,
                p => (*p as f64) * (*p as f64 - 1.0) * x.powi(*p as i32 - 2),
            },
            (Basis::Sin(w), 1) => w * (w * x).cos(),
            (Basis::Sin(w), _) => -w * w * (w * x).sin(),
            (Basis::Cos(w), 1) => -w * (w * x).sin(),
            (Basis::Cos(w), _) => -w * w * (w * x).cos(),
            (Basis::Custom(c), _) => {
                return Err(Error::UnsupportedModel(format!(
                    "term `{}` has no registered derivative",
                    c.name
                )))
            }
        })
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, Basis::Custom(_))
    }
}

/// Ordered set of candidate terms.
#[derive(Debug, Clone)]
pub struct FunctionLibrary {
    pub name: String,
    terms: Vec<Basis>,
}

impl FunctionLibrary {
    pub fn new(name: impl Into<String>, terms: Vec<Basis>) -> Result<Self> {
        let mut names: Vec<String> = terms.iter().map(Basis::name).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "duplicate library term `{}`",
                w[0]
            )));
        }
        Ok(Self {
            name: name.into(),
            terms,
        })
    }

    /// `{1, x, ..., x^degree}`
    pub fn monomials(name: impl Into<String>, degree: u32) -> Self {
        Self {
            name: name.into(),
            terms: (0..=degree).map(Basis::Monomial).collect(),
        }
    }

    pub fn from_names(name: impl Into<String>, names: &[String]) -> Result<Self> {
        let terms = names
            .iter()
            .map(|n| Basis::parse(n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, terms)
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            terms: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Basis] {
        &self.terms
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(Basis::name).collect()
    }

    /// Row of term values at `x`.
    pub fn eval_row(&self, x: f64) -> Vec<f64> {
        self.terms.iter().map(|t| t.eval(x)).collect()
    }
}

/// Coefficients over a library; zero entries are inactive.
#[derive(Debug, Clone)]
pub struct SparseModel {
    pub library: FunctionLibrary,
    pub coefficients: Vec<f64>,
}

impl SparseModel {
    pub fn new(library: FunctionLibrary, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != library.len() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for a library of {} terms",
                coefficients.len(),
                library.len()
            )));
        }
        Ok(Self {
            library,
            coefficients,
        })
    }

    /// Polynomial `sum_p coeffs[p] x^p` over the monomial library of matching degree.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        let degree = coeffs.len().saturating_sub(1) as u32;
        let library = if coeffs.is_empty() {
            FunctionLibrary::empty("poly")
        } else {
            FunctionLibrary::monomials("poly", degree)
        };
        Self {
            library,
            coefficients: coeffs.to_vec(),
        }
    }

    pub fn zeros(library: FunctionLibrary) -> Self {
        let n = library.len();
        Self {
            library,
            coefficients: vec![0.0; n],
        }
    }

    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|c| *c == 0.0)
    }

    /// Coefficient of the term with the given name, 0 if absent.
    pub fn coefficient(&self, name: &str) -> f64 {
        self.library
            .terms()
            .iter()
            .position(|t| t.name() == name)
            .map_or(0.0, |i| self.coefficients[i])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.library
            .terms()
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, c)| **c != 0.0)
            .map(|(t, c)| c * t.eval(x))
            .sum()
    }

    /// Value (`order` 0), first or second derivative at `x`. Terms with a zero
    /// coefficient do not need a derivative.
    pub fn derivative(&self, x: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(Error::UnsupportedModel(format!(
                "derivative order {order} (at most 2 supported)"
            )));
        }
        let mut acc = 0.0;
        for (t, c) in self.library.terms().iter().zip(&self.coefficients) {
            if *c != 0.0 {
                acc += c * t.derivative(x, order)?;
            }
        }
        Ok(acc)
    }

    /// Fails unless every active term is twice differentiable.
    pub fn check_differentiable(&self) -> Result<()> {
        for (t, c) in self.library.terms().iter().zip(&self.coefficients) {
            if *c != 0.0 && !t.is_differentiable() {
                return Err(Error::UnsupportedModel(format!(
                    "term `{}` has no registered derivative",
                    t.name()
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for SparseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .support()
            .into_iter()
            .map(|i| {
                let name = self.library.terms()[i].name();
                let c = self.coefficients[i];
                if name == "1" {
                    format!("{c}")
                } else {
                    format!("{c}*{name}")
                }
            })
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SparseModelRepr {
    library: Vec<String>,
    coefficients: Vec<f64>,
    support: Vec<usize>,
}

impl Serialize for SparseModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SparseModelRepr {
            library: self.library.names(),
            coefficients: self.coefficients.clone(),
            support: self.support(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparseModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = SparseModelRepr::deserialize(d)?;
        let library =
            FunctionLibrary::from_names("library", &repr.library).map_err(D::Error::custom)?;
        let model = SparseModel::new(library, repr.coefficients).map_err(D::Error::custom)?;
        if model.support() != repr.support {
            return Err(D::Error::custom(
                "support does not match nonzero coefficients",
            ));
        }
        Ok(model)
    }
}
