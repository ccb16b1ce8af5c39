/// Per-parameter gradient accumulators in the owning model's `params()` order.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTape {
    values: Vec<f64>,
}

impl GradientTape {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}
