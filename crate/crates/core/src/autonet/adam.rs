use super::NetError;

pub const DEFAULT_LR: f64 = 1e-4;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Number of completed steps.
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Zeroed moments for parameter groups of the given lengths.
    pub fn new(group_lens: &[usize], lr: f64) -> Self {
        AdamState {
            m: group_lens.iter().map(|n| vec![0.0; *n]).collect(),
            v: group_lens.iter().map(|n| vec![0.0; *n]).collect(),
            t: 0,
            lr,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<(), NetError> {
        let shapes_ok = params.len() == self.m.len()
            && grads.len() == self.m.len()
            && params
                .iter()
                .zip(grads)
                .zip(&self.m)
                .all(|((p, g), m)| p.len() == m.len() && g.len() == m.len());
        if !shapes_ok {
            return Err(NetError::ParamMismatch);
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (gi, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[gi], &mut self.v[gi]);
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_step(theta: f64, g: f64) -> f64 {
        let mut st = AdamState::new(&[1], 1e-4);
        let mut p = [theta];
        st.step(&mut [&mut p[..]], &[&[g][..]]).unwrap();
        assert_eq!(st.t, 1);
        p[0]
    }

    #[test]
    fn zero_gradient_leaves_params() {
        assert_eq!(one_step(0.25, 0.0), 0.25);
    }

    #[test]
    fn first_step_is_sign_times_lr() {
        let d = one_step(0.0, 1.0);
        assert!((d + 1e-4 / (1.0 + 1e-8)).abs() < 1e-18);
        let d = one_step(0.0, -7.0);
        assert!((d - 1e-4 * 7.0 / (7.0 + 1e-8)).abs() < 1e-18);
        assert!((d - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn step_count_increments() {
        let mut st = AdamState::new(&[2, 1], 1e-3);
        let mut a = [1.0, 2.0];
        let mut b = [3.0];
        for i in 1..=5 {
            st.step(&mut [&mut a[..], &mut b[..]], &[&[0.1, -0.2][..], &[0.3][..]]).unwrap();
            assert_eq!(st.t, i);
        }
        assert!(a[0] < 1.0 && a[1] > 2.0 && b[0] < 3.0);
    }

    #[test]
    fn mismatched_groups_rejected() {
        let mut st = AdamState::new(&[2], 1e-3);
        let mut a = [1.0];
        assert_eq!(
            st.step(&mut [&mut a[..]], &[&[0.1][..]]).unwrap_err(),
            NetError::ParamMismatch
        );
        assert_eq!(st.t, 0);
    }
}
