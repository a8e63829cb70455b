//! Rectangular minimum-cost assignment (Hungarian method with potentials).

/// Assigns each of `rows` rows to a distinct column of a row-major
/// `rows × cols` cost matrix, minimizing the total. Requires `rows <= cols`
/// and finite costs. Returns the column of each row.
pub fn solve(cost: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    assert!(rows <= cols, "more rows than columns");
    assert_eq!(cost.len(), rows * cols);
    if rows == 0 {
        return Vec::new();
    }
    // 1-based potentials; column 0 is a virtual start
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![0.0f64; cols + 1];
    let mut used = vec![false; cols + 1];
    for r in 1..=rows {
        owner[0] = r;
        let mut c0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[c0] = true;
            let r0 = owner[c0];
            let mut delta = f64::INFINITY;
            let mut c1 = 0;
            let row = &cost[(r0 - 1) * cols..r0 * cols];
            for c in 1..=cols {
                if used[c] {
                    continue;
                }
                let reduced = row[c - 1] - u[r0] - v[c];
                if reduced < minv[c] {
                    minv[c] = reduced;
                    way[c] = c0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    c1 = c;
                }
            }
            for c in 0..=cols {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            c0 = c1;
            if owner[c0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[c0];
            owner[c0] = owner[prev];
            c0 = prev;
            if c0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; rows];
    for c in 1..=cols {
        if owner[c] != 0 {
            assignment[owner[c] - 1] = c - 1;
        }
    }
    assignment
}
