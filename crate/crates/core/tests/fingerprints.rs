use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stfp::fingerprints::{ecfp, random_projection_fingerprint, st_fingerprint, st_fingerprints};
use stfp::smiles::{enumerate_random, parse};
use stfp::transformer::{corpus_vocab, ModelConfig, TransformerModel};

fn parser_corpus() -> Vec<String> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/parser_corpus.smi")).unwrap();
    text.lines().map(String::from).collect()
}

fn model(d: usize, layers: usize, heads: usize, corpus: &[String]) -> TransformerModel<f32> {
    TransformerModel::new(ModelConfig::new(0, layers, heads, d), corpus_vocab(corpus), 17).unwrap()
}

#[test]
fn width_is_four_times_model_dimension() {
    let corpus = parser_corpus();
    let m = model(256, 1, 4, &corpus[..200]);
    assert_eq!(st_fingerprint(&m, "CC(=O)Oc1ccccc1C(=O)O").unwrap().len(), 1024);
    let m = model(64, 2, 2, &corpus[..200]);
    assert_eq!(st_fingerprint(&m, "CCO").unwrap().len(), 256);
}

#[test]
fn batching_matches_single_molecules_bit_for_bit() {
    let corpus = parser_corpus();
    let m = model(32, 2, 4, &corpus);
    let mut sample: Vec<String> = corpus.iter().step_by(37).take(40).cloned().collect();
    sample.insert(5, "not smiles".into());
    sample.push(sample[0].clone());
    for batch_size in [1, 7, 64] {
        let batched = st_fingerprints(&m, &sample, batch_size);
        assert_eq!(batched.len(), sample.len());
        for (s, b) in sample.iter().zip(&batched) {
            match st_fingerprint(&m, s) {
                Ok(single) => {
                    let b = b.as_ref().unwrap();
                    assert!(single.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()), "{s}");
                }
                Err(_) => assert!(b.is_err()),
            }
        }
    }
}

#[test]
fn max_pool_dominates_mean_pool() {
    let corpus = parser_corpus();
    let m = model(16, 2, 2, &corpus);
    for s in corpus.iter().step_by(101) {
        let fp = st_fingerprint(&m, s).unwrap();
        assert!((0..16).all(|j| fp[16 + j] >= fp[j] - 1e-6), "{s}");
    }
}

#[test]
fn ecfp_ignores_the_choice_of_smiles() {
    let corpus = parser_corpus();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in corpus.iter().step_by(corpus.len() / 100).take(100) {
        let g = parse(s).unwrap();
        let reference = ecfp(&g, 4, 1024);
        for _ in 0..10 {
            let other = enumerate_random(&g, &mut rng);
            assert_eq!(ecfp(&parse(&other).unwrap(), 4, 1024), reference, "{s} vs {other}");
        }
    }
    assert!(ecfp(&parse("c1ccccc1").unwrap(), 4, 1024).count_ones() <= 3);
}

#[test]
fn random_projection_is_a_token_count_map() {
    // identical token multisets give identical vectors
    let a = random_projection_fingerprint("CC(N)O", 5, 64).unwrap();
    let b = random_projection_fingerprint("NC(C)O", 5, 64).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    let c = random_projection_fingerprint("CCO", 5, 64).unwrap();
    let cc = random_projection_fingerprint("CCOCCO", 5, 64).unwrap();
    assert!(c.iter().zip(&cc).all(|(x, y)| (2.0 * x - y).abs() < 1e-12));
    assert!(random_projection_fingerprint("C[", 5, 64).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ecfp_bits_grow_with_diameter(idx in 0usize..2000, bits in prop::sample::select(vec![64usize, 512, 1024, 2048])) {
        let corpus = parser_corpus();
        let g = parse(&corpus[idx % corpus.len()]).unwrap();
        let mut prev = ecfp(&g, 0, bits);
        for d in [2, 4, 6, 8] {
            let next = ecfp(&g, d, bits);
            prop_assert!(prev.ones().all(|b| next.get(b)));
            prop_assert_eq!(next.to_hex().len(), bits / 4);
            prev = next;
        }
    }
}
