use serde::Serialize;

/// Stick-breaking weights: `π_1 = V_1`, `π_c = V_c Π_{r<c} (1 - V_r)`.
pub fn stick_weights(v: &[f64]) -> Vec<f64> {
    let mut remaining = 1.0;
    v.iter()
        .map(|&vc| {
            let w = vc * remaining;
            remaining *= 1.0 - vc;
            w
        })
        .collect()
}

/// Stick variables of the instantiated components, their weights and the
/// concentration α. Mutate `v` only through the methods so that `pi`
/// stays in sync.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StickState {
    v: Vec<f64>,
    pi: Vec<f64>,
    pub alpha: f64,
}

impl StickState {
    pub fn new(v: Vec<f64>, alpha: f64) -> Self {
        let pi = stick_weights(&v);
        StickState { v, pi, alpha }
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Stored weights π.
    pub fn weights(&self) -> &[f64] {
        &self.pi
    }

    /// Stick mass not yet assigned to an instantiated component.
    pub fn remaining(&self) -> f64 {
        self.v.iter().map(|v| 1.0 - v).product()
    }

    pub fn set(&mut self, v: Vec<f64>) {
        self.pi = stick_weights(&v);
        self.v = v;
    }

    pub fn push(&mut self, vc: f64) {
        let rest = self.remaining();
        self.v.push(vc);
        self.pi.push(vc * rest);
    }

    pub fn swap_adjacent(&mut self, j: usize) {
        self.v.swap(j, j + 1);
        self.pi = stick_weights(&self.v);
    }

    pub fn truncate(&mut self, len: usize) {
        self.v.truncate(len);
        self.pi.truncate(len);
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}
