/// Disjoint sets with path halving. The caller decides which root survives a
/// merge, so the representative can carry meaning (the elder of the component).
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let grand = self.parent[self.parent[x] as usize];
            self.parent[x] = grand;
            x = grand as usize;
        }
        x
    }

    /// Attaches root `child` under root `root`.
    pub fn link(&mut self, root: usize, child: usize) {
        debug_assert_eq!(self.parent[root] as usize, root);
        debug_assert_eq!(self.parent[child] as usize, child);
        self.parent[child] = root as u32;
    }
}
