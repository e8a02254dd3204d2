use std::fmt::Debug;

/// Storage precision of snapshot data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Precision {
    Single,
    #[default]
    Double,
}

impl Precision {
    /// Relative singular-value cutoff used when none is given.
    pub fn default_rank_tol(self) -> f64 {
        match self {
            Precision::Single => 1e-5,
            Precision::Double => 1e-6,
        }
    }

    pub fn dtype_code(self) -> u8 {
        match self {
            Precision::Single => 0,
            Precision::Double => 1,
        }
    }

    pub fn size_of(self) -> usize {
        match self {
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }
}

/// Scalar type used to store snapshot columns.
///
/// Arithmetic on stored data always widens to `f64`; only the storage
/// format changes with the precision.
pub trait Real: Copy + Debug + Default + PartialEq + Send + Sync + 'static {
    const PRECISION: Precision;

    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;

    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }
}

impl Real for f32 {
    const PRECISION: Precision = Precision::Single;

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::Double;

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }
}
