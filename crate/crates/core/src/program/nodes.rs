use std::collections::BTreeSet;

use super::{Block, BlockKind, Program};

/// Which block kinds an enumeration should report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KindFilter {
    All,
    Only(BTreeSet<BlockKind>),
}

impl KindFilter {
    pub fn only(kinds: impl IntoIterator<Item = BlockKind>) -> Self {
        KindFilter::Only(kinds.into_iter().collect())
    }

    pub fn accepts(&self, kind: BlockKind) -> bool {
        match self {
            KindFilter::All => true,
            KindFilter::Only(set) => set.contains(&kind),
        }
    }
}

/// A block together with its position in the tree.
#[derive(Debug, Clone)]
pub struct NodeRef<'p> {
    pub block: &'p Block,
    /// Pre-order position among all blocks of the program.
    pub index: usize,
    /// Enclosing blocks, root first.
    pub ancestors: Vec<&'p Block>,
}

impl NodeRef<'_> {
    pub fn ancestor_ids(&self) -> Vec<&str> {
        self.ancestors.iter().map(|b| b.id.as_str()).collect()
    }

    pub fn parent(&self) -> Option<&Block> {
        self.ancestors.last().copied()
    }
}

/// Pre-order traversal of the program. Positions (`index`) count every
/// block, whether or not it passes the filter.
pub fn enumerate_nodes<'p>(program: &'p Program, filter: &KindFilter) -> Vec<NodeRef<'p>> {
    fn visit<'p>(
        block: &'p Block,
        stack: &mut Vec<&'p Block>,
        counter: &mut usize,
        filter: &KindFilter,
        out: &mut Vec<NodeRef<'p>>,
    ) {
        let index = *counter;
        *counter += 1;
        if filter.accepts(block.kind()) {
            out.push(NodeRef {
                block,
                index,
                ancestors: stack.clone(),
            });
        }
        stack.push(block);
        for child in &block.children {
            visit(child, stack, counter, filter, out);
        }
        stack.pop();
    }

    let mut out = Vec::new();
    let mut stack = Vec::new();
    let mut counter = 0;
    for block in &program.blocks {
        visit(block, &mut stack, &mut counter, filter, &mut out);
    }
    out
}
