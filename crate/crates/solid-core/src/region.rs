//! Per-dimension search-region descriptors: an interval inside `[0, 1]` for
//! locally active coordinates, or a single pinned value for inactive ones.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionDim {
    Interval { lo: f64, hi: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRegion {
    dims: Vec<RegionDim>,
}

impl SearchRegion {
    pub fn new(dims: Vec<RegionDim>) -> Self {
        for d in &dims {
            match *d {
                RegionDim::Interval { lo, hi } => {
                    assert!(0.0 <= lo && lo <= hi && hi <= 1.0, "bad interval [{lo}, {hi}]")
                }
                RegionDim::Fixed(v) => assert!((0.0..=1.0).contains(&v), "bad pin {v}"),
            }
        }
        SearchRegion { dims }
    }

    pub fn full_box(p: usize) -> Self {
        SearchRegion {
            dims: vec![RegionDim::Interval { lo: 0.0, hi: 1.0 }; p],
        }
    }

    pub fn p(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[RegionDim] {
        &self.dims
    }

    pub fn dim(&self, k: usize) -> RegionDim {
        self.dims[k]
    }

    /// Indices of interval (searchable) dimensions.
    pub fn free_dims(&self) -> Vec<usize> {
        self.dims
            .iter()
            .enumerate()
            .filter_map(|(k, d)| matches!(d, RegionDim::Interval { .. }).then_some(k))
            .collect()
    }

    pub fn is_fixed(&self, k: usize) -> bool {
        matches!(self.dims[k], RegionDim::Fixed(_))
    }

    /// Projects a point onto the region: interval coordinates clamped, fixed
    /// coordinates replaced by their pins.
    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.p());
        self.dims
            .iter()
            .zip(x)
            .map(|(d, &v)| match *d {
                RegionDim::Interval { lo, hi } => v.clamp(lo, hi),
                RegionDim::Fixed(pin) => pin,
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.p()
            && self.dims.iter().zip(x).all(|(d, &v)| match *d {
                RegionDim::Interval { lo, hi } => (lo..=hi).contains(&v),
                RegionDim::Fixed(pin) => v == pin,
            })
    }

    /// A point with every free coordinate at its interval midpoint.
    pub fn center(&self) -> Vec<f64> {
        self.dims
            .iter()
            .map(|d| match *d {
                RegionDim::Interval { lo, hi } => 0.5 * (lo + hi),
                RegionDim::Fixed(pin) => pin,
            })
            .collect()
    }
}
