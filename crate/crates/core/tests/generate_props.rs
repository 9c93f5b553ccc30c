use pcsdp::generate::{generate_detailed, generate_instance, random_orthonormal_completion, BMode, GenParams};
use pcsdp::linalg::symmetric_eigenvalues;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn completion_is_orthonormal_and_keeps_the_base() {
    let s = 0.5_f64.sqrt();
    let base = vec![
        vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, s, s, 0.0, 0.0, 0.0],
        vec![0.0, s, -s, 0.0, 0.0, 0.0],
    ];
    for seed in 0..20 {
        let q = random_orthonormal_completion(&base, 6, seed).unwrap();
        assert_eq!(q.len(), 6);
        assert_eq!(&q[..3], &base[..]);
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&q[i], &q[j]) - want).abs() <= 1e-10);
            }
        }
    }
    let skew = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
    assert!(random_orthonormal_completion(&skew, 2, 0).is_err());
}

#[test]
fn second_family_spectra_stay_in_range() {
    for seed in 0..5 {
        let g = generate_detailed(&GenParams::second_family(20, 5, seed)).unwrap();
        let inst = &g.instance;
        for (i, a) in inst.a().iter().enumerate() {
            let ev = symmetric_eigenvalues(a).unwrap();
            let zeros = ev.iter().filter(|l| l.abs() <= 1e-8).count();
            assert!(zeros >= g.null_counts[i]);
            assert!(ev[0] >= -20.0 - 1e-8 && *ev.last().unwrap() <= 100.0 + 1e-8);
        }
        let ev = symmetric_eigenvalues(inst.c()).unwrap();
        assert!(ev[0] >= -1e-8 && *ev.last().unwrap() <= 100.0 + 1e-8);
        assert!(inst.b().iter().all(|&b| b == 1.0));
    }
}

#[test]
fn null_vectors_are_drawn_with_the_insert_probability() {
    // Each A_i receives each of the k/2 shared vectors independently.
    let (n, k) = (10, 6);
    let shared = k / 2;
    let mut total = 0usize;
    let mut count = 0usize;
    for seed in 0..200 {
        let g = generate_detailed(&GenParams::first_family(n, k, seed)).unwrap();
        assert_eq!(g.shared_vectors.len(), shared);
        total += g.null_counts[..k].iter().sum::<usize>();
        count += k;
    }
    let p = 0.8;
    let mean = (count * shared) as f64 * p;
    let sd = ((count * shared) as f64 * p * (1.0 - p)).sqrt();
    let got = total as f64;
    assert!((got - mean).abs() <= 3.0 * sd, "{got} vs {mean} +- {sd}");
}

#[test]
fn huge_family_plants_common_null_vectors() {
    let p = GenParams::huge_family(25, 4, 9, [0.0, 5.0], [1.0, 2.0]);
    let g = generate_detailed(&p).unwrap();
    assert_eq!(g.fixed_vectors.len(), 5);
    let inst = &g.instance;
    assert!(inst.nonneg_y());
    assert_eq!(inst.linear_constraints().len(), 4);
    assert!(inst.b().iter().all(|b| (0.0..=1.0).contains(b)));
    for v in &g.fixed_vectors {
        for m in inst.a().iter().chain(std::iter::once(inst.c())) {
            assert!(m.mul_vec(v).amax() <= 1e-9);
        }
    }
    assert_eq!(p.b_mode, BMode::RandomUniform);
}

#[test]
fn seeds_are_reproducible() {
    let a = generate_instance(&GenParams::first_family(12, 3, 77)).unwrap();
    let b = generate_instance(&GenParams::first_family(12, 3, 77)).unwrap();
    let c = generate_instance(&GenParams::first_family(12, 3, 78)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn bad_parameters_are_rejected() {
    let base = GenParams::first_family(6, 4, 0);
    for p in [
        GenParams { n: 0, ..base.clone() },
        GenParams { k: 0, ..base.clone() },
        GenParams { shared_null_count: 7, ..base.clone() },
        GenParams { insert_prob: 1.5, ..base.clone() },
        GenParams { eig_range_a: [3.0, 1.0], ..base.clone() },
    ] {
        assert!(generate_instance(&p).is_err());
    }
}
