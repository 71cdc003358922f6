//! Rooted trees and their elementary weights.

use std::cmp::Ordering;

/// A rooted tree stored as the sorted multiset of its subtrees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    children: Vec<Tree>,
}

impl Ord for Tree {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| other.children.len().cmp(&self.children.len()))
            .then_with(|| self.children.cmp(&other.children))
    }
}

impl PartialOrd for Tree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Tree {
    pub fn leaf() -> Self {
        Tree { children: Vec::new() }
    }

    pub fn with_children(mut children: Vec<Tree>) -> Self {
        children.sort();
        Tree { children }
    }

    pub fn children(&self) -> &[Tree] {
        &self.children
    }

    /// Number of vertices.
    pub fn order(&self) -> usize {
        1 + self.children.iter().map(Tree::order).sum::<usize>()
    }

    /// The tree's density `γ`, so the order condition target is `1/γ`.
    pub fn density(&self) -> u64 {
        self.order() as u64 * self.children.iter().map(Tree::density).product::<u64>()
    }
}

/// All rooted trees with exactly `n` vertices, in a fixed order.
pub fn trees_of_order(n: usize) -> Vec<Tree> {
    let mut by_order: Vec<Vec<Tree>> = vec![Vec::new(), vec![Tree::leaf()]];
    for k in 2..=n {
        let smaller: Vec<Tree> = by_order[1..k].iter().flatten().cloned().collect();
        let mut out = Vec::new();
        let mut chosen = Vec::new();
        multisets(&smaller, 0, k - 1, &mut chosen, &mut out);
        out.sort();
        by_order.push(out);
    }
    if n == 0 {
        return Vec::new();
    }
    by_order.swap_remove(n)
}

fn multisets(pool: &[Tree], start: usize, remaining: usize, chosen: &mut Vec<Tree>, out: &mut Vec<Tree>) {
    if remaining == 0 {
        out.push(Tree::with_children(chosen.clone()));
        return;
    }
    for i in start..pool.len() {
        let ord = pool[i].order();
        if ord > remaining {
            continue;
        }
        chosen.push(pool[i].clone());
        multisets(pool, i, remaining - ord, chosen, out);
        chosen.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_per_order() {
        let counts: Vec<usize> = (1..=7).map(|n| trees_of_order(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 4, 9, 20, 48]);
    }

    #[test]
    fn densities_of_order_four() {
        let mut d: Vec<u64> = trees_of_order(4).iter().map(Tree::density).collect();
        d.sort();
        assert_eq!(d, vec![4, 8, 12, 24]);
    }
}
