//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Cyclic Jacobi eigenvalues of a dense symmetric `n x n` row-major matrix,
/// sorted descending.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let scale: f64 = m.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eig
}

/// Dense sample covariance (`d x d`, divisor `n - 1`) of a row-major `n x d` matrix.
pub fn covariance(x: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x[i * d + j]).sum::<f64>() / n as f64).collect();
    let mut c = vec![0.0; d * d];
    for i in 0..n {
        for a in 0..d {
            let xa = x[i * d + a] - mean[a];
            for b in 0..d {
                c[a * d + b] += xa * (x[i * d + b] - mean[b]);
            }
        }
    }
    c.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    c
}

pub fn random_matrix(rng: &mut StdRng, n: usize, d: usize) -> Vec<f64> {
    (0..n * d).map(|_| rng.gen::<f64>()).collect()
}

/// Per-pixel counting over `(row, col)` coordinates.
pub fn brute_confusion(pred: &[u8], gt: &[u8], w: usize, h: usize) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut fnn, mut tn) = (0, 0, 0, 0);
    for r in 0..h {
        for c in 0..w {
            let (p, g) = (pred[r * w + c], gt[r * w + c]);
            if p == 1 && g == 1 {
                tp += 1;
            } else if p == 1 {
                fp += 1;
            } else if g == 1 {
                fnn += 1;
            } else {
                tn += 1;
            }
        }
    }
    (tp, fp, fnn, tn)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Two-tailed Student-t tail by quadrature. With `x = sqrt(df) tan θ` the
/// density becomes `cos^(df-1) θ` up to a constant, so
/// `p = ∫_{θ0}^{π/2} cos^(df-1) / ∫_0^{π/2} cos^(df-1)`, `θ0 = atan(|t|/sqrt(df))`.
pub fn quad_t_sf(t: f64, df: f64) -> f64 {
    let m = df - 1.0;
    let f = |th: f64| {
        let c = th.cos();
        if c <= 0.0 {
            if m == 0.0 { 1.0 } else { 0.0 }
        } else {
            (m * c.ln()).exp()
        }
    };
    // beyond ~14 standard widths the integrand is below e^-98
    let upper = if m > 0.0 {
        (14.0 / m.sqrt()).min(std::f64::consts::FRAC_PI_2)
    } else {
        std::f64::consts::FRAC_PI_2
    };
    let theta0 = (t.abs() / df.sqrt()).atan();
    let total = simpson(f, 0.0, upper, 200_000);
    let tail = simpson(f, theta0.min(upper), upper, 200_000);
    tail / total
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// `(t, df, p)` for the paired test on `b - a`.
pub fn oracle_paired(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let t = mean(&d) / (sample_var(&d) / n).sqrt();
    let df = n - 1.0;
    (t, df, quad_t_sf(t, df))
}

/// `(t, df, p)` for Welch's test, signed `mean(b) - mean(a)`.
pub fn oracle_welch(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (sa, sb) = (sample_var(a) / a.len() as f64, sample_var(b) / b.len() as f64);
    let t = (mean(b) - mean(a)) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    (t, df, quad_t_sf(t, df))
}

/// Writes `n` synthetic 32x32 ultrasound-like images with one bright
/// elliptical lesion each, as `images/<id>.png` and `masks/<id>_mask.png`.
pub fn write_synthetic_dataset(dir: &std::path::Path, prefix: &str, n: usize, seed: u64, gain: f64) {
    use pcaharmony::ingest::{Image, Mask};
    let (w, h) = (32usize, 32usize);
    let mut r = rng(seed);
    std::fs::create_dir_all(dir.join("images")).unwrap();
    std::fs::create_dir_all(dir.join("masks")).unwrap();
    for i in 0..n {
        let (cx, cy) = (r.gen_range(10.0..22.0), r.gen_range(10.0..22.0));
        let (rx, ry) = (r.gen_range(3.0..7.0), r.gen_range(3.0..7.0));
        let mut img = Vec::with_capacity(w * h);
        let mut mask = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let dx = (x as f64 + 0.5 - cx) / rx;
                let dy = (y as f64 + 0.5 - cy) / ry;
                let inside = dx * dx + dy * dy <= 1.0;
                let base = 0.2 + 0.1 * (y as f64 / h as f64) + r.gen_range(0.0..0.15);
                let v = if inside { base + 0.4 } else { base };
                img.push((v * gain).clamp(0.0, 1.0));
                mask.push(u8::from(inside));
            }
        }
        let id = format!("{prefix}{i:03}");
        Image::new(w, h, img)
            .unwrap()
            .quantized()
            .save_png(&dir.join("images").join(format!("{id}.png")))
            .unwrap();
        Mask::new(w, h, mask)
            .unwrap()
            .save_png(&dir.join("masks").join(format!("{id}_mask.png")))
            .unwrap();
    }
}

/// A run config for the given dataset directories using the stub trainer.
pub fn stub_config(work_dir: &std::path::Path, datasets: &[(&str, &std::path::Path)]) -> String {
    let mut s = format!(
        "work_dir = {:?}\nseed = 42\nresize = \"32x32\"\n\n[trainer]\ncommand = [{:?}, \"stub-trainer\"]\njobs = 4\n",
        work_dir.to_str().unwrap(),
        env!("CARGO_BIN_EXE_pcaharmony"),
    );
    for (name, dir) in datasets {
        s.push_str(&format!(
            "\n[[dataset]]\nname = {name:?}\ndir = {:?}\npattern = \"images/*.png\"\nmasks = \"masks/{{stem}}_mask.png\"\n",
            dir.to_str().unwrap()
        ));
    }
    s
}
