/// Physical constants of the monodomain / Rogers-McCulloch system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameters {
    /// Membrane capacitance `C_m`.
    pub c_m: f64,
    /// Conductivity `D`.
    pub d: f64,
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub d_e: f64,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            c_m: 1.0,
            d: 1e-4,
            a: 0.13,
            b: 0.013,
            c1: 0.26,
            c2: 0.1,
            d_e: 1.0,
        }
    }
}

impl Parameters {
    /// Reaction coefficient `C_r(u, w) = c1 (u - a)(u - 1) + c2 w`.
    #[inline]
    pub fn reaction(&self, u: f64, w: f64) -> f64 {
        self.c1 * (u - self.a) * (u - 1.0) + self.c2 * w
    }

    /// Nonlinear term `c1 u (u - a)(u - 1) + c2 u w`.
    #[inline]
    pub fn ionic(&self, u: f64, w: f64) -> f64 {
        u * self.reaction(u, w)
    }
}
