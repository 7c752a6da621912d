// Commit a round's InvalidList and UncheckedList to one Merkle root and
// show that moving a transaction between the lists changes it.

use std::error::Error;

use repchain::crypto::{KeyPair, NodeId};
use repchain::merkle::merkle_root;
use repchain::types::{commit_lists, RoundLists};
use repchain::{ProviderId, Transaction};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let key = KeyPair::derive(1, NodeId::Provider(0));
    let txs: Vec<Transaction> = (0..5)
        .map(|seq| Transaction::new_signed(&key, ProviderId(0), seq, 3, seq % 2 == 0))
        .collect();

    let lists = RoundLists {
        tx_list: vec![txs[0].clone()],
        invalid_list: vec![txs[1].clone(), txs[3].clone()],
        unchecked_list: vec![txs[2].clone(), txs[4].clone()],
    };
    let root = lists.commitment();
    println!("round lists root: {root}");
    assert_eq!(root, commit_lists(&lists.invalid_list, &lists.unchecked_list));

    // The same transactions with one moved from unchecked to invalid.
    let mut moved = lists.clone();
    let tx = moved.unchecked_list.pop().ok_or("empty list")?;
    moved.invalid_list.push(tx);
    println!("after moving one tx: {}", moved.commitment());
    assert_ne!(root, moved.commitment());

    let leaves: Vec<Vec<u8>> = txs.iter().map(Transaction::payload).collect();
    println!("root over all five payloads: {}", merkle_root(&leaves));
    println!("empty list root: {}", merkle_root::<Vec<u8>>(&[]));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
