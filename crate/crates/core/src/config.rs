#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub tol: f64,
    pub steps_per_unit: usize,
    pub probes: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            tol: 1e-8,
            steps_per_unit: 200,
            probes: 20,
            seed: 0,
        }
    }
}

impl Config {
    pub fn steps_for(&self, length: f64) -> usize {
        ((length.abs() * self.steps_per_unit as f64).ceil() as usize).max(2)
    }
}
