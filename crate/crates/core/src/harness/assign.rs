//! Minimum-cost assignment on a square cost matrix.

/// Hungarian method (shortest augmenting paths with potentials), `O(n³)`.
///
/// Returns `col[r]`: the column assigned to row `r`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for r in 1..=n {
        row_of[0] = r;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0; n];
    for j in 1..=n {
        col[row_of[j] - 1] = j - 1;
    }
    col
}

/// Exhaustive search over all permutations; the reference for small `n`.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = f64::INFINITY;
    permute(&mut perm, 0, cost, &mut best, &mut best_cost);
    best
}

fn permute(
    perm: &mut Vec<usize>,
    k: usize,
    cost: &[Vec<f64>],
    best: &mut Vec<usize>,
    best_cost: &mut f64,
) {
    if k == perm.len() {
        let c = assignment_cost(cost, perm);
        if c < *best_cost {
            *best_cost = c;
            best.clone_from(perm);
        }
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, cost, best, best_cost);
        perm.swap(k, i);
    }
}

pub fn assignment_cost(cost: &[Vec<f64>], col: &[usize]) -> f64 {
    col.iter().enumerate().map(|(r, &c)| cost[r][c]).sum()
}
