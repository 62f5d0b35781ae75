//! Integrands f(y) of expectation objectives.

/// The function inside E_q[f(y)].
///
/// `eval` must be finite on every support point an estimator can reach.
/// Continuous coordinates additionally need `gradient` for the GO and
/// pathwise estimators; discrete coordinates are handled by forward
/// differences of `eval`.
pub trait Integrand: Sync {
    fn eval(&self, y: &[f64]) -> f64;

    /// ∇_y f(y), or `None` when no gradient evaluator exists.
    fn gradient(&self, _y: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

type EvalFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// An [`Integrand`] assembled from closures.
pub struct FnIntegrand {
    eval: EvalFn,
    grad: Option<GradFn>,
}

impl FnIntegrand {
    pub fn new(eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FnIntegrand {
            eval: Box::new(eval),
            grad: None,
        }
    }

    pub fn with_gradient(mut self, grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Box::new(grad));
        self
    }

    /// A one-dimensional integrand with scalar derivative.
    pub fn scalar(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnIntegrand::new(move |y| f(y[0])).with_gradient(move |y| vec![df(y[0])])
    }
}

impl Integrand for FnIntegrand {
    fn eval(&self, y: &[f64]) -> f64 {
        (self.eval)(y)
    }

    fn gradient(&self, y: &[f64]) -> Option<Vec<f64>> {
        self.grad.as_ref().map(|g| g(y))
    }
}

impl std::fmt::Debug for FnIntegrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnIntegrand")
            .field("has_gradient", &self.grad.is_some())
            .finish()
    }
}

/// The four test integrands used throughout the unbiasedness checks.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// f(y) = y
    Identity,
    /// f(y) = y²
    Square,
    /// f(y) = (y − c)²
    ShiftedSquare(f64),
    /// f(y) = exp(−y²/10)
    GaussianBump,
}

impl TestFunction {
    pub fn value(self, y: f64) -> f64 {
        match self {
            TestFunction::Identity => y,
            TestFunction::Square => y * y,
            TestFunction::ShiftedSquare(c) => (y - c) * (y - c),
            TestFunction::GaussianBump => (-y * y / 10.0).exp(),
        }
    }

    pub fn derivative(self, y: f64) -> f64 {
        match self {
            TestFunction::Identity => 1.0,
            TestFunction::Square => 2.0 * y,
            TestFunction::ShiftedSquare(c) => 2.0 * (y - c),
            TestFunction::GaussianBump => -y / 5.0 * (-y * y / 10.0).exp(),
        }
    }

    pub fn label(self) -> String {
        match self {
            TestFunction::Identity => "y".into(),
            TestFunction::Square => "y^2".into(),
            TestFunction::ShiftedSquare(c) => format!("(y-{c})^2"),
            TestFunction::GaussianBump => "exp(-y^2/10)".into(),
        }
    }
}

impl Integrand for TestFunction {
    fn eval(&self, y: &[f64]) -> f64 {
        self.value(y[0])
    }

    fn gradient(&self, y: &[f64]) -> Option<Vec<f64>> {
        Some(vec![self.derivative(y[0])])
    }
}
