use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Rows scaled to unit norm; rejects non-finite and zero rows.
fn unit_rows(rows: &[Vec<f32>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let mut m = DMatrix::<f64>::zeros(n, d);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(Error::InvalidDocument(format!(
                "embedding row {i} has dimension {}, expected {d}",
                row.len()
            )));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let norm = row.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector(i));
        }
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = *x as f64 / norm;
        }
    }
    Ok(m)
}

/// exp of the Shannon entropy of a spectrum, negatives clamped to 0.
pub fn entropy_exp(eigenvalues: impl IntoIterator<Item = f64>) -> f64 {
    let h: f64 = eigenvalues
        .into_iter()
        .map(|l| l.max(0.0))
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.ln())
        .sum();
    h.exp()
}

/// Vendi score with the cosine kernel: exp(-Σ λ ln λ) over the eigenvalues
/// of K/n. The non-zero spectrum of K/n = XXᵀ/n equals that of XᵀX/n, so
/// the smaller of the two Gram matrices is decomposed.
pub fn vendi_score(rows: &[Vec<f32>]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Empty("vendi batch"));
    }
    let x = unit_rows(rows)?;
    let n = x.nrows() as f64;
    let gram = if x.nrows() <= x.ncols() {
        &x * x.transpose()
    } else {
        x.transpose() * &x
    } / n;
    let eig = SymmetricEigen::new(gram);
    Ok(entropy_exp(eig.eigenvalues.iter().copied()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Cyclic Jacobi rotations on the full n×n kernel.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-22 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    fn oracle(rows: &[Vec<f32>]) -> f64 {
        let n = rows.len();
        let unit: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let norm = r.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
                r.iter().map(|x| *x as f64 / norm).collect()
            })
            .collect();
        let k: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
                    .collect()
            })
            .collect();
        entropy_exp(jacobi_eigenvalues(k))
    }

    fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f32>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect())
            .collect()
    }

    #[test]
    fn identical_rows() {
        let rows = vec![vec![0.3f32, -0.2, 0.9]; 10];
        assert!((vendi_score(&rows).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn orthonormal_rows() {
        let rows: Vec<Vec<f32>> = (0..16)
            .map(|i| (0..16).map(|j| (i == j) as u8 as f32).collect())
            .collect();
        assert!((vendi_score(&rows).unwrap() - 16.0).abs() < 1e-6);
    }

    #[test]
    fn matches_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (n, d) in [(32, 8), (5, 12), (1, 4), (20, 20)] {
            let rows = random_rows(&mut rng, n, d);
            let got = vendi_score(&rows).unwrap();
            let want = oracle(&rows);
            assert!((got - want).abs() < 1e-6, "n={n} d={d}: {got} vs {want}");
            assert!(got >= 1.0 - 1e-9 && got <= n as f64 + 1e-9);
        }
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows = random_rows(&mut rng, 24, 6);
        let mut rev = rows.clone();
        rev.reverse();
        assert!((vendi_score(&rows).unwrap() - vendi_score(&rev).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn spectrum_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows = random_rows(&mut rng, 30, 7);
        let x = unit_rows(&rows).unwrap();
        let eig = SymmetricEigen::new(x.transpose() * &x / 30.0);
        assert!((eig.eigenvalues.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bad_input() {
        assert!(matches!(vendi_score(&[]), Err(Error::Empty(_))));
        assert!(matches!(vendi_score(&[vec![f32::NAN, 1.0]]), Err(Error::NonFinite(0))));
        assert!(matches!(vendi_score(&[vec![1.0, 0.0], vec![0.0, 0.0]]), Err(Error::ZeroVector(1))));
    }
}
