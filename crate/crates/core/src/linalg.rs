//! Small dense helpers not covered by nalgebra's decompositions.

use nalgebra::DMatrix;

/// Relative threshold on `|R_ii|` below which a pivoted column counts as aliased.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Householder QR with column pivoting on column norms (Businger-Golub).
/// Returns the magnitudes of the diagonal of `R` and the column permutation.
pub fn pivoted_qr_diagonal(a: &DMatrix<f64>) -> (Vec<f64>, Vec<usize>) {
    let mut a = a.clone();
    let (n, k) = a.shape();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut diag = Vec::with_capacity(k.min(n));
    for i in 0..k.min(n) {
        let norm_sq =
            |a: &DMatrix<f64>, j: usize| (i..n).map(|r| a[(r, j)] * a[(r, j)]).sum::<f64>();
        let (best, _) =
            (i..k)
                .map(|j| (j, norm_sq(&a, j)))
                .fold(
                    (i, f64::NEG_INFINITY),
                    |acc, c| if c.1 > acc.1 { c } else { acc },
                );
        if best != i {
            a.swap_columns(i, best);
            perm.swap(i, best);
        }
        let norm = norm_sq(&a, i).sqrt();
        diag.push(norm);
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[(i, i)] > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in place
        a[(i, i)] -= alpha;
        let vnorm_sq: f64 = (i..n).map(|r| a[(r, i)] * a[(r, i)]).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        for j in i + 1..k {
            let dot: f64 = (i..n).map(|r| a[(r, i)] * a[(r, j)]).sum();
            let f = 2.0 * dot / vnorm_sq;
            for r in i..n {
                let vi = a[(r, i)];
                a[(r, j)] -= f * vi;
            }
        }
    }
    (diag, perm)
}

/// Column indices (into `a`) that are numerically dependent on earlier-pivoted columns.
pub fn aliased_columns(a: &DMatrix<f64>) -> Vec<usize> {
    let (diag, perm) = pivoted_qr_diagonal(a);
    let largest = diag.first().copied().unwrap_or(0.0);
    let mut aliased: Vec<usize> = diag
        .iter()
        .enumerate()
        .filter(|(_, &d)| d.is_nan() || d <= RANK_TOLERANCE * largest)
        .map(|(i, _)| perm[i])
        .collect();
    aliased.extend(perm.iter().skip(diag.len()).copied());
    aliased.sort_unstable();
    aliased
}
