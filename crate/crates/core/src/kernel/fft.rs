use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place forward DFT of a row-major array with the given shape.
pub(crate) fn forward_nd(data: &mut [Complex64], shape: &[usize]) {
    debug_assert_eq!(data.len(), shape.iter().product::<usize>());
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = data.len();
    for &n in shape {
        stride /= n;
        if n == 1 {
            continue;
        }
        let fft = planner.plan_fft_forward(n);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let block = n * stride;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                if stride == 1 {
                    fft.process(&mut data[base..base + n]);
                    continue;
                }
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_dft_2d() {
        let shape = [3usize, 4];
        let n: usize = shape.iter().product();
        let input: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let mut fast = input.clone();
        forward_nd(&mut fast, &shape);
        for k0 in 0..3 {
            for k1 in 0..4 {
                let mut acc = Complex64::new(0.0, 0.0);
                for x0 in 0..3 {
                    for x1 in 0..4 {
                        let ang = -2.0
                            * std::f64::consts::PI
                            * ((k0 * x0) as f64 / 3.0 + (k1 * x1) as f64 / 4.0);
                        acc += input[x0 * 4 + x1] * Complex64::from_polar(1.0, ang);
                    }
                }
                assert!((acc - fast[k0 * 4 + k1]).norm() < 1e-12);
            }
        }
    }
}
