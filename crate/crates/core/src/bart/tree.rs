use serde::Serialize;

use super::design::Design;

pub(crate) const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub parent: u32,
    pub left: u32,
    pub right: u32,
    /// Split column and cutpoint index; meaningful for internal nodes only.
    pub var: u16,
    pub cut: u16,
    /// Leaf mean; meaningful for leaves only.
    pub value: f64,
    pub depth: u16,
}

impl Node {
    fn leaf(parent: u32, depth: u16, value: f64) -> Node {
        Node {
            parent,
            left: NONE,
            right: NONE,
            var: 0,
            cut: 0,
            value,
            depth,
        }
    }
}

/// Binary decision tree in an arena. Node 0 is the root. Removed nodes go on
/// a LIFO free list, so collapsing and immediately re-splitting a node hands
/// back the same child ids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tree {
    nodes: Vec<Node>,
    #[serde(skip)]
    free: Vec<u32>,
}

impl Tree {
    pub fn stump(value: f64) -> Tree {
        Tree {
            nodes: vec![Node::leaf(NONE, 0, value)],
            free: Vec::new(),
        }
    }

    pub fn node(&self, id: u32) -> &Node {
        &self.nodes[id as usize]
    }

    pub(crate) fn node_mut(&mut self, id: u32) -> &mut Node {
        &mut self.nodes[id as usize]
    }

    pub(crate) fn arena_len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_leaf(&self, id: u32) -> bool {
        self.nodes[id as usize].left == NONE
    }

    /// Live node ids in depth-first, left-first order.
    pub fn walk(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            out.push(id);
            let n = &self.nodes[id as usize];
            if n.left != NONE {
                stack.push(n.right);
                stack.push(n.left);
            }
        }
        out
    }

    pub fn leaves(&self) -> Vec<u32> {
        self.walk().into_iter().filter(|&id| self.is_leaf(id)).collect()
    }

    /// Internal nodes whose two children are both leaves.
    pub fn nogs(&self) -> Vec<u32> {
        self.walk()
            .into_iter()
            .filter(|&id| {
                let n = &self.nodes[id as usize];
                n.left != NONE && self.is_leaf(n.left) && self.is_leaf(n.right)
            })
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().len()
    }

    pub fn depth(&self) -> u16 {
        self.walk()
            .into_iter()
            .map(|id| self.nodes[id as usize].depth)
            .max()
            .unwrap_or(0)
    }

    /// Cutpoint indices `[lo, hi)` of column `var` that still split node `id`
    /// given the rules of its ancestors.
    pub fn cut_range(&self, id: u32, var: u16, n_cuts: usize) -> (usize, usize) {
        let (mut lo, mut hi) = (0usize, n_cuts);
        let mut child = id;
        let mut parent = self.nodes[id as usize].parent;
        while parent != NONE {
            let p = &self.nodes[parent as usize];
            if p.var == var {
                let c = p.cut as usize;
                if p.left == child {
                    hi = hi.min(c);
                } else {
                    lo = lo.max(c + 1);
                }
            }
            child = parent;
            parent = p.parent;
        }
        (lo, hi.max(lo))
    }

    /// Columns with at least one usable cutpoint at node `id`.
    pub fn splittable_vars(&self, id: u32, design: &Design) -> Vec<u16> {
        (0..design.width() as u16)
            .filter(|&v| {
                let (lo, hi) = self.cut_range(id, v, design.n_cuts(v as usize));
                hi > lo
            })
            .collect()
    }

    pub fn can_split(&self, id: u32, design: &Design) -> bool {
        (0..design.width() as u16).any(|v| {
            let (lo, hi) = self.cut_range(id, v, design.n_cuts(v as usize));
            hi > lo
        })
    }

    fn alloc(&mut self, node: Node) -> u32 {
        match self.free.pop() {
            Some(id) => {
                self.nodes[id as usize] = node;
                id
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        }
    }

    /// Turns leaf `id` into an internal node with two fresh leaves.
    pub fn split(&mut self, id: u32, var: u16, cut: u16) -> (u32, u32) {
        let depth = self.nodes[id as usize].depth + 1;
        let value = self.nodes[id as usize].value;
        let l = self.alloc(Node::leaf(id, depth, value));
        let r = self.alloc(Node::leaf(id, depth, value));
        let n = &mut self.nodes[id as usize];
        n.left = l;
        n.right = r;
        n.var = var;
        n.cut = cut;
        (l, r)
    }

    /// Removes the two leaf children of `id`, making it a leaf again.
    pub fn collapse(&mut self, id: u32) {
        let (l, r) = {
            let n = &self.nodes[id as usize];
            (n.left, n.right)
        };
        debug_assert!(self.is_leaf(l) && self.is_leaf(r));
        self.free.push(r);
        self.free.push(l);
        let n = &mut self.nodes[id as usize];
        n.left = NONE;
        n.right = NONE;
    }

    /// Leaf reached by a row given as cutpoint ranks.
    #[inline]
    pub fn leaf_for_ranks(&self, ranks: &[u16]) -> u32 {
        let mut id = 0u32;
        loop {
            let n = &self.nodes[id as usize];
            if n.left == NONE {
                return id;
            }
            id = if ranks[n.var as usize] <= n.cut { n.left } else { n.right };
        }
    }

    /// Prediction for a raw feature row.
    pub fn predict(&self, row: &[f64], design: &Design) -> f64 {
        let mut id = 0u32;
        loop {
            let n = &self.nodes[id as usize];
            if n.left == NONE {
                return n.value;
            }
            let cut = design.cutpoints(n.var as usize)[n.cut as usize];
            id = if row[n.var as usize] < cut { n.left } else { n.right };
        }
    }
}
