//! Prescribed velocity fields with closed-form vorticity.

/// A divergence-free velocity field on the centered unit cube.
pub trait PrescribedFlow: Sync {
    fn velocity(&self, x: &[f64; 3]) -> [f64; 3];
    fn vorticity(&self, x: &[f64; 3]) -> [f64; 3];
}

/// `u(x) = (x₂, -x₁, 0) e(x)` with `e(x) = exp(-1/(1 - 4|x|²))` inside the
/// inscribed ball and zero outside.
#[derive(Debug, Clone, Copy, Default)]
pub struct SwirlFlow;

impl SwirlFlow {
    /// `(e, 1 - 4|x|²)`, with `e = 0` outside the ball.
    fn envelope(x: &[f64; 3]) -> (f64, f64) {
        let w = 1.0 - 4.0 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        if w <= 0.0 {
            (0.0, w)
        } else {
            ((-1.0 / w).exp(), w)
        }
    }
}

impl PrescribedFlow for SwirlFlow {
    fn velocity(&self, x: &[f64; 3]) -> [f64; 3] {
        let (e, _) = Self::envelope(x);
        [x[1] * e, -x[0] * e, 0.0]
    }

    fn vorticity(&self, x: &[f64; 3]) -> [f64; 3] {
        let (e, w) = Self::envelope(x);
        if e == 0.0 {
            return [0.0; 3];
        }
        // ∇e = -8 x e / w²
        let g = -8.0 * e / (w * w);
        [
            x[0] * x[2] * g,
            x[1] * x[2] * g,
            -2.0 * e - (x[0] * x[0] + x[1] * x[1]) * g,
        ]
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroFlow;

impl PrescribedFlow for ZeroFlow {
    fn velocity(&self, _: &[f64; 3]) -> [f64; 3] {
        [0.0; 3]
    }

    fn vorticity(&self, _: &[f64; 3]) -> [f64; 3] {
        [0.0; 3]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curl_fd(f: &SwirlFlow, x: &[f64; 3]) -> [f64; 3] {
        let h = 1e-5;
        let d = |i: usize, j: usize| {
            let mut p = *x;
            let mut m = *x;
            p[j] += h;
            m[j] -= h;
            (f.velocity(&p)[i] - f.velocity(&m)[i]) / (2.0 * h)
        };
        [d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)]
    }

    #[test]
    fn vorticity_matches_finite_differences() {
        let flow = SwirlFlow;
        for x in [[0.1, 0.2, -0.05], [-0.3, 0.1, 0.2], [0.0, 0.0, 0.0], [0.2, -0.25, 0.3]] {
            let exact = flow.vorticity(&x);
            let fd = curl_fd(&flow, &x);
            for k in 0..3 {
                assert!((exact[k] - fd[k]).abs() <= 1e-6 * (1.0 + exact[k].abs()), "{x:?} {exact:?} {fd:?}");
            }
        }
        assert_eq!(flow.vorticity(&[0.4, 0.3, 0.0]), [0.0; 3]);
    }

    #[test]
    fn swirl_is_divergence_free() {
        let flow = SwirlFlow;
        let x = [0.12, -0.21, 0.17];
        let h = 1e-5;
        let div: f64 = (0..3)
            .map(|k| {
                let mut p = x;
                let mut m = x;
                p[k] += h;
                m[k] -= h;
                (flow.velocity(&p)[k] - flow.velocity(&m)[k]) / (2.0 * h)
            })
            .sum();
        assert!(div.abs() < 1e-9);
    }

    #[test]
    fn zero_flow() {
        assert_eq!(ZeroFlow.vorticity(&[0.1, 0.2, 0.3]), [0.0; 3]);
        assert_eq!(ZeroFlow.velocity(&[0.1, 0.2, 0.3]), [0.0; 3]);
    }
}
