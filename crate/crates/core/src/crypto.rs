//! Simulated PKI: SHA-256 digests, keyed-hash signatures and a keyed-hash
//! VRF. The Identity Manager is modelled by [`KeyRegistry`], which maps each
//! public identifier to the verification key installed at scenario setup.
//!
//! None of this is cryptographically meaningful as a signature scheme; it only
//! provides unforgeability under the assumption that the secret is unknown.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::codec::{Canonical, Encoder};

/// A 256-bit SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Low 64 bits, big-endian interpretation of the trailing bytes.
    pub fn low_u64(&self) -> u64 {
        let mut tail = [0u8; 8];
        tail.copy_from_slice(&self.0[24..]);
        u64::from_be_bytes(tail)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Canonical for Digest {
    fn encode(&self, enc: &mut Encoder) {
        enc.bytes(&self.0);
    }
}

/// SHA-256 over the plain concatenation of `parts`.
pub fn hash_concat(parts: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    Digest(hasher.finalize().into())
}

pub fn hash(data: &[u8]) -> Digest {
    hash_concat(&[data])
}

/// Role-qualified participant identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeId {
    Provider(u32),
    Collector(u32),
    Governor(u32),
}

impl NodeId {
    fn role_tag(&self) -> u8 {
        match self {
            NodeId::Provider(_) => 0,
            NodeId::Collector(_) => 1,
            NodeId::Governor(_) => 2,
        }
    }

    fn index(&self) -> u32 {
        match *self {
            NodeId::Provider(i) | NodeId::Collector(i) | NodeId::Governor(i) => i,
        }
    }
}

impl Canonical for NodeId {
    fn encode(&self, enc: &mut Encoder) {
        enc.bytes(&[self.role_tag()]).u64(u64::from(self.index()));
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Signature(pub [u8; 32]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", &hex::encode(self.0)[..16])
    }
}

impl Canonical for Signature {
    fn encode(&self, enc: &mut Encoder) {
        enc.bytes(&self.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VrfOutput {
    pub value: Digest,
    pub proof: Digest,
}

#[derive(Clone)]
pub struct KeyPair {
    pub node_id: NodeId,
    secret: [u8; 32],
    pub public: Digest,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("node_id", &self.node_id)
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn from_secret(node_id: NodeId, secret: [u8; 32]) -> Self {
        let public = hash_concat(&[b"pk", &secret]);
        Self {
            node_id,
            secret,
            public,
        }
    }

    /// Key issued by the simulated Identity Manager for `node_id` under a
    /// scenario seed. Distinct node ids get distinct seeds.
    pub fn derive(scenario_seed: u64, node_id: NodeId) -> Self {
        let secret = hash_concat(&[
            b"sk",
            &scenario_seed.to_be_bytes(),
            &node_id.to_canonical_bytes(),
        ]);
        Self::from_secret(node_id, secret.0)
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        Signature(keyed_tag(b"sig", &self.secret, msg).0)
    }

    pub fn vrf_eval(&self, input: &[u8]) -> VrfOutput {
        VrfOutput {
            value: keyed_tag(b"vrf", &self.secret, input),
            proof: keyed_tag(b"vrfp", &self.secret, input),
        }
    }
}

fn keyed_tag(domain: &[u8], secret: &[u8; 32], msg: &[u8]) -> Digest {
    hash_concat(&[domain, secret, msg])
}

/// Verification-key registry installed by the Identity Manager.
#[derive(Debug, Clone, Default)]
pub struct KeyRegistry {
    secrets: HashMap<Digest, [u8; 32]>,
    publics: HashMap<NodeId, Digest>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, kp: &KeyPair) {
        self.secrets.insert(kp.public, kp.secret);
        self.publics.insert(kp.node_id, kp.public);
    }

    pub fn public_of(&self, node: NodeId) -> Option<Digest> {
        self.publics.get(&node).copied()
    }

    pub fn verify(&self, public: &Digest, msg: &[u8], sig: &Signature) -> bool {
        match self.secrets.get(public) {
            Some(secret) => keyed_tag(b"sig", secret, msg).0 == sig.0,
            None => false,
        }
    }

    /// Verifies a signature by node identity rather than public key.
    pub fn verify_node(&self, node: NodeId, msg: &[u8], sig: &Signature) -> bool {
        self.public_of(node)
            .is_some_and(|public| self.verify(&public, msg, sig))
    }

    pub fn vrf_verify(&self, public: &Digest, input: &[u8], out: &VrfOutput) -> bool {
        match self.secrets.get(public) {
            Some(secret) => {
                keyed_tag(b"vrfp", secret, input) == out.proof
                    && keyed_tag(b"vrf", secret, input) == out.value
            }
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn registry_with(kp: &KeyPair) -> KeyRegistry {
        let mut reg = KeyRegistry::new();
        reg.register(kp);
        reg
    }

    #[test]
    fn sign_is_deterministic_and_round_trips() {
        let kp = KeyPair::derive(7, NodeId::Collector(3));
        let reg = registry_with(&kp);
        assert_eq!(kp.sign(b"hello"), kp.sign(b"hello"));
        assert!(reg.verify(&kp.public, b"hello", &kp.sign(b"hello")));
    }

    #[test]
    fn signature_rejects_other_messages() {
        let kp = KeyPair::derive(7, NodeId::Provider(0));
        let reg = registry_with(&kp);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2_000 {
            let len = rng.gen_range(1..48);
            let msg: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let mut other = msg.clone();
            let at = rng.gen_range(0..other.len());
            other[at] ^= 1 << rng.gen_range(0..8);
            let sig = kp.sign(&msg);
            assert!(reg.verify(&kp.public, &msg, &sig));
            assert!(!reg.verify(&kp.public, &other, &sig));
        }
    }

    #[test]
    fn unknown_public_never_verifies() {
        let kp = KeyPair::derive(7, NodeId::Provider(0));
        let reg = KeyRegistry::new();
        assert!(!reg.verify(&kp.public, b"m", &kp.sign(b"m")));
    }

    #[test]
    fn distinct_nodes_get_distinct_keys() {
        let a = KeyPair::derive(1, NodeId::Collector(0));
        let b = KeyPair::derive(1, NodeId::Governor(0));
        let c = KeyPair::derive(2, NodeId::Collector(0));
        assert_ne!(a.public, b.public);
        assert_ne!(a.public, c.public);
    }

    #[test]
    fn vrf_round_trip_and_tamper_detection() {
        let kp = KeyPair::derive(9, NodeId::Governor(1));
        let reg = registry_with(&kp);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0u64..1_000 {
            let input = i.to_be_bytes();
            let out = kp.vrf_eval(&input);
            assert_eq!(out, kp.vrf_eval(&input));
            assert!(reg.vrf_verify(&kp.public, &input, &out));

            let mut bad = out;
            bad.value.0[rng.gen_range(0..32)] ^= 1 << rng.gen_range(0..8);
            assert!(!reg.vrf_verify(&kp.public, &input, &bad));
            let mut bad_proof = out;
            bad_proof.proof.0[rng.gen_range(0..32)] ^= 1 << rng.gen_range(0..8);
            assert!(!reg.vrf_verify(&kp.public, &input, &bad_proof));
        }
    }

    #[test]
    fn fixed_secret_vectors() {
        let kp = KeyPair::from_secret(NodeId::Provider(0), [7; 32]);
        assert_eq!(kp.public.to_hex(), "1e6899fac015206203bb711c46e052f27d369cf42964a9f8087ded4dd6e2c829");
        assert_eq!(
            hex::encode(kp.sign(b"hello").0),
            "cd4910ddb5baf64754deb820b81f0c6753b551b8606076371f75692be1c2a019"
        );
        let out = kp.vrf_eval(b"round-1");
        assert_eq!(out.value.to_hex(), "ba9a91a0f2bb207335ca55abd1964871fe7c8d00ecf9964759959c9020a1eaf3");
        assert_eq!(out.proof.to_hex(), "2a0510d8d347d495c5fcfc5e5b5ccae6b5394e6957a116b17e11b586fd7d3632");
    }

    #[test]
    fn random_forgeries_never_verify() {
        let kp = KeyPair::derive(3, NodeId::Provider(4));
        let reg = registry_with(&kp);
        let mut rng = ChaCha8Rng::seed_from_u64(0xF0);
        let accepted = (0..100_000u64)
            .filter(|i| reg.verify(&kp.public, &i.to_be_bytes(), &Signature(rng.gen())))
            .count();
        assert_eq!(accepted, 0);
    }

    #[test]
    fn vrf_low_bits_are_uniform() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        const BINS: usize = 64;
        let kp = KeyPair::derive(12, NodeId::Governor(0));
        let mut counts = [0u32; BINS];
        let n = 10_000u64;
        for i in 0..n {
            let low32 = kp.vrf_eval(&i.to_be_bytes()).value.low_u64() & 0xFFFF_FFFF;
            counts[((low32 * BINS as u64) >> 32) as usize] += 1;
        }
        let expected = n as f64 / BINS as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((BINS - 1) as f64).unwrap().cdf(stat);
        assert!(p > 0.001, "chi-square {stat}, p = {p}");
    }
}
