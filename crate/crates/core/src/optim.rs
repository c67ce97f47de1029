//! Derivative-free local minimisation (Nelder–Mead simplex).

#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    pub x_tol: f64,
    pub initial_step: f64,
    /// Re-seed the simplex around the best point this many times.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { max_evals: 4000, f_tol: 1e-14, x_tol: 1e-10, initial_step: 0.2, restarts: 2 }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let mut best = self.run(&mut f, x0);
        for _ in 0..self.restarts {
            let next = self.run(&mut f, &best.x);
            let improved = next.value < best.value;
            let evals = best.evals + next.evals;
            if improved {
                best = Minimum { evals, ..next };
            } else {
                best.evals = evals;
                break;
            }
        }
        best
    }

    fn run<F: FnMut(&[f64]) -> f64>(&self, f: &mut F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let eval = |f: &mut F, x: &[f64]| {
            let v = f(x);
            if v.is_nan() { f64::INFINITY } else { v }
        };
        let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += if p[i].abs() > 1e-8 { self.initial_step * p[i].abs().max(1.0) } else { self.initial_step };
            simplex.push(p);
        }
        let mut vals: Vec<f64> = simplex.iter().map(|p| eval(f, p)).collect();
        let mut evals = n + 1;
        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        while evals < self.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            vals = order.iter().map(|&i| vals[i]).collect();
            let spread = (vals[n] - vals[0]).abs();
            let size = simplex[1..]
                .iter()
                .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= self.f_tol * (1.0 + vals[0].abs()) && size <= self.x_tol {
                break;
            }
            if size <= 1e-15 {
                break;
            }
            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect()
            };
            let xr = along(-alpha);
            let fr = eval(f, &xr);
            evals += 1;
            if fr < vals[0] {
                let xe = along(-gamma);
                let fe = eval(f, &xe);
                evals += 1;
                if fe < fr {
                    simplex[n] = xe;
                    vals[n] = fe;
                } else {
                    simplex[n] = xr;
                    vals[n] = fr;
                }
            } else if fr < vals[n - 1] {
                simplex[n] = xr;
                vals[n] = fr;
            } else {
                let (xc, fc) = if fr < vals[n] {
                    let xc = along(-rho);
                    let fc = eval(f, &xc);
                    (xc, fc)
                } else {
                    let xc = along(rho);
                    let fc = eval(f, &xc);
                    (xc, fc)
                };
                evals += 1;
                if fc < vals[n].min(fr) {
                    simplex[n] = xc;
                    vals[n] = fc;
                } else {
                    for i in 1..=n {
                        let p: Vec<f64> =
                            simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + sigma * (x - b)).collect();
                        vals[i] = eval(f, &p);
                        simplex[i] = p;
                    }
                    evals += n;
                }
            }
        }
        let (ib, &vb) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        Minimum { x: simplex[ib].clone(), value: vb, evals }
    }
}
