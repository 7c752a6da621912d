//! Binary Merkle root with odd-node promotion.

use crate::crypto::{hash, hash_concat, Digest};

/// Root of a binary Merkle tree over `items`.
///
/// Leaves are `H(item)`, inner nodes `H(left || right)`. A node without a
/// sibling is promoted to the next level unchanged. The empty list commits to
/// [`Digest::ZERO`].
pub fn merkle_root<T: AsRef<[u8]>>(items: &[T]) -> Digest {
    if items.is_empty() {
        return Digest::ZERO;
    }
    let mut level: Vec<Digest> = items.iter().map(|item| hash(item.as_ref())).collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [left, right] => hash_concat(&[&left.0, &right.0]),
                [single] => *single,
                _ => unreachable!(),
            })
            .collect();
    }
    level[0]
}
