use crate::error::{Error, Result};
use num_complex::Complex64;

/// Square QAM alphabet with unit average energy and Gray labels.
#[derive(Debug, Clone)]
pub struct Constellation {
    order: usize,
    points: Vec<Complex64>,
    labels: Vec<u32>,
}

fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

impl Constellation {
    /// `order` must be 4, 16 or 64.
    pub fn qam(order: usize) -> Result<Self> {
        if !matches!(order, 4 | 16 | 64) {
            return Err(Error::InvalidArgument(format!(
                "QAM order {order} unsupported (use 4, 16 or 64)"
            )));
        }
        let side = (order as f64).sqrt().round() as usize;
        let half_bits = side.trailing_zeros();
        let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let level = |i: usize| (2.0 * i as f64 - (side as f64 - 1.0)) / scale;
        let mut points = Vec::with_capacity(order);
        let mut labels = Vec::with_capacity(order);
        for q in 0..side {
            for i in 0..side {
                points.push(Complex64::new(level(i), level(q)));
                labels.push((gray(q as u32) << half_bits) | gray(i as u32));
            }
        }
        Ok(Self {
            order,
            points,
            labels,
        })
    }

    /// Arbitrary alphabet, rescaled to unit average energy. Used to check
    /// relabeling invariances.
    pub fn from_points(points: Vec<Complex64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(
                "alphabet needs at least two points".into(),
            ));
        }
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
        if energy <= 0.0 || !energy.is_finite() {
            return Err(Error::InvalidArgument(
                "alphabet has zero or non-finite energy".into(),
            ));
        }
        let s = energy.sqrt();
        let labels = (0..points.len() as u32).collect();
        Ok(Self {
            order: points.len(),
            points: points.into_iter().map(|p| p / s).collect(),
            labels,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> f64 {
        (self.order as f64).log2()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}
