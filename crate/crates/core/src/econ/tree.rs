use serde::{Deserialize, Serialize};

use super::ModelEcon;

/// How a failed task is divided into its `n` subproblems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// `n` equal parts.
    Even,
    /// `n − 1` parts the model can solve outright plus the remainder;
    /// equal parts once the task fits into `n` solvable pieces.
    Peel,
}

/// Total cost of solving a task of complexity `k` by explicit recursive
/// expansion: every node above capability pays a failed attempt `p·c` and
/// planning `n·D`, every leaf pays `complexity·c`.
pub fn tree_cost(k: f64, m: &ModelEcon, n: u32, d: f64, split: Split) -> f64 {
    let nf = f64::from(n);
    let mut total = 0.0;
    // (complexity, multiplicity): identical subtrees are expanded once
    let mut stack = vec![(k, 1.0)];
    while let Some((size, count)) = stack.pop() {
        if size <= m.p {
            total += count * size * m.c;
            continue;
        }
        total += count * (m.p * m.c + nf * d);
        match split {
            Split::Peel if size > nf * m.p => {
                total += count * (nf - 1.0) * m.p * m.c;
                stack.push((size - (nf - 1.0) * m.p, count));
            }
            _ => stack.push((size / nf, count * nf)),
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_tasks_are_leaves() {
        let m = ModelEcon::new(10.0, 2.0).unwrap();
        assert_eq!(tree_cost(4.0, &m, 3, 5.0, Split::Even), 8.0);
        // one division into two leaves of 6
        assert_eq!(tree_cost(12.0, &m, 2, 1.0, Split::Even), 20.0 + 2.0 + 24.0);
    }

    #[test]
    fn division_counts() {
        let m = ModelEcon::new(1.0, 1.0).unwrap();
        // exact power of n: (k/p − 1)/(n − 1) divisions plus k of conquest
        let c = tree_cost(1000.0, &m, 10, 0.0, Split::Even);
        assert!((c - (111.0 + 1000.0)).abs() < 1e-9);
        // peeling 3 solvable parts per division: 332 peels, then one even split
        let c = tree_cost(1000.0, &m, 4, 0.0, Split::Peel);
        assert!((c - (333.0 + 1000.0)).abs() < 1e-9, "{c}");
    }
}
