/// Disjoint sets with path compression and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    /// Smallest element of each set, valid at roots.
    min: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            min: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Returns false if `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.min[ra] = self.min[ra].min(self.min[rb]);
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    /// Smallest element of the set containing `x`.
    pub fn canonical(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.min[r]
    }

    /// All sets, each sorted, ordered by smallest element.
    pub fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut by_canon: Vec<Vec<usize>> = vec![Vec::new(); n];
        for x in 0..n {
            let c = self.canonical(x);
            by_canon[c].push(x);
        }
        by_canon.into_iter().filter(|g| !g.is_empty()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_is_the_smallest_member() {
        let mut uf = UnionFind::new(6);
        uf.union(5, 4);
        uf.union(4, 3);
        uf.union(1, 2);
        assert_eq!(uf.canonical(5), 3);
        assert_eq!(uf.groups(), vec![vec![0], vec![1, 2], vec![3, 4, 5]]);
        assert!(!uf.union(3, 5));
        assert!(uf.same(2, 1));
    }
}
