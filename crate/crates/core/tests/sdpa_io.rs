mod common;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcp_core::dimacs::sdpa_feasible;
use rcp_core::instances::{gen_recipe_i, gen_worst_case};
use rcp_core::lmi::is_strictly_feasible;
use rcp_core::sdpa::*;

fn random_instance(rng: &mut ChaCha8Rng) -> SdpaInstance {
    let m = rng.random_range(1..=4);
    let nblocks = rng.random_range(1..=3);
    let block_sizes: Vec<i64> = (0..nblocks)
        .map(|_| {
            let s = rng.random_range(1..=3);
            if rng.random_bool(0.3) {
                -s
            } else {
                s
            }
        })
        .collect();
    let mut entries = Vec::new();
    for matno in 0..=m {
        for (b, &size) in block_sizes.iter().enumerate() {
            let s = size.unsigned_abs() as usize;
            for i in 1..=s {
                for j in i..=s {
                    if (size < 0 && i != j) || rng.random_bool(0.4) {
                        continue;
                    }
                    entries.push(SdpaEntry {
                        matno,
                        blkno: b + 1,
                        i,
                        j,
                        value: rng.random_range(-2.0..2.0),
                    });
                }
            }
        }
    }
    SdpaInstance {
        m,
        block_sizes,
        cost: (0..m).map(|_| rng.random_range(-5.0..5.0)).collect(),
        entries,
    }
}

#[test]
fn random_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..200 {
        let inst = random_instance(&mut rng);
        let text = write_sdpa(&inst);
        let back = parse_sdpa(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(write_sdpa(&back), text);
    }
}

#[test]
fn sign_semantics_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let p = to_lmi(&inst).unwrap();
        for _ in 0..1000 {
            let x = DVector::from_fn(inst.m, |_, _| rng.random_range(-3.0..3.0));
            assert_eq!(sdpa_feasible(&inst, &x), is_strictly_feasible(&p, &x));
            assert_eq!(p.objective(&x), DVector::from_vec(inst.cost.clone()).dot(&x));
        }
    }
}

#[test]
fn generated_instances_survive_serialization() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let p = gen_recipe_i(3, 6, &mut rng).unwrap();
    let back = to_lmi(&parse_sdpa(&write_sdpa(&from_lmi(&p))).unwrap()).unwrap();
    assert_eq!(back, p);
    let (w, _) = gen_worst_case(3).unwrap();
    let inst = from_lmi(&w);
    assert_eq!(inst.block_sizes, vec![-9]);
    assert_eq!(to_lmi(&parse_sdpa(&write_sdpa(&inst)).unwrap()).unwrap(), w);
}

#[test]
fn separators_and_layout_tolerated() {
    let text = "* header\n\"more\n2\n2\n(3, -2)\n{1.5,\n-1}\n0 1 1 1 1\n  1,1,1,2,2.0\n2 2 2 2 -1e0\n";
    let inst = parse_sdpa(text).unwrap();
    assert_eq!(inst.block_sizes, vec![3, -2]);
    assert_eq!(inst.cost, vec![1.5, -1.0]);
    assert_eq!(inst.entries.len(), 3);
    assert_eq!(inst.dim(), 5);
}

#[test]
fn sdplib_files_round_trip_when_present() {
    for name in ["truss1", "truss4", "hinf1"] {
        let Some(text) = common::sdplib_file(name) else {
            eprintln!("{name}.dat-s not found under {}", common::sdplib_dir().display());
            continue;
        };
        let inst = parse_sdpa(&text).unwrap();
        assert_eq!(parse_sdpa(&write_sdpa(&inst)).unwrap(), inst);
    }
}
