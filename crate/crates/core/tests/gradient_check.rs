use lorafp_core::capture::{Frame, FrameSource, Representation};
use lorafp_core::cnn::{Cnn, CnnArchitecture};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-3;
const L2: f64 = 1e-4;

fn frames(n: usize, w: usize, classes: u32, seed: u64) -> Vec<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Frame {
            data: (0..2 * w).map(|_| rng.random_range(-2.0..2.0)).collect(),
            width: w,
            label: i as u32 % classes,
            source: FrameSource { scenario_id: "g".into(), transmission: 0, window: i as u32 },
            representation: Representation::Iq,
        })
        .collect()
}

/// Evaluation point for the check.
///
/// Conv weights that feed batch norm are scaled up (the loss is invariant to
/// their scale), so a ±EPS step moves normalised activations far less than
/// their spacing and max-pool routing does not flip. Batch-norm offsets put
/// every block activation on one side of the leaky kink: `side = 1.0` checks
/// the positive branch, `side = -1.0` the negative-slope branch.
fn model_at(dropout: f64, seed: u64, side: f64) -> Cnn<f64> {
    let mut arch = CnnArchitecture::reduced(5);
    arch.dropout = dropout;
    let mut model = Cnn::<f64>::new(arch, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 99);
    let last_bn = format!("bn{}.", model.arch.conv_blocks - 1);
    for t in &mut model.params {
        let name = t.name.clone();
        // Gains ahead of another block are large so their steps are small
        // relative to the spread they produce downstream.
        let gain = if name.starts_with(&last_bn) { 1.0 } else { 50.0 };
        for v in &mut t.data {
            if name.starts_with("conv") {
                *v *= 50.0;
            } else if name.ends_with("gamma") {
                *v = gain * rng.random_range(0.8..1.2);
            } else if name.ends_with("beta") {
                *v = side * gain * rng.random_range(5.5..6.5);
            } else if !t.decay {
                *v = rng.random_range(-0.5..0.5);
            }
        }
    }
    if side < 0.0 {
        // Negative-branch activations are 100x smaller; keep logits O(1).
        let fi = 3 * model.arch.conv_blocks;
        for v in &mut model.params[fi].data {
            *v *= 50.0;
        }
    }
    model
}

/// Per-tensor `‖g_fd − g‖ / max(‖g_fd‖, ‖g‖)`.
fn check(mut model: Cnn<f64>, seed: u64, n: usize, eps: f64) -> Vec<(String, f64)> {
    let data = frames(n, 64, 5, seed);
    let batch: Vec<&Frame> = data.iter().collect();
    let (_, grads, _) = model.loss_and_gradients(&batch, L2, false, 1234).unwrap();
    let mut out = Vec::new();
    for ti in 0..model.params.len() {
        let mut diff = 0.0;
        let mut norm_fd = 0.0;
        let mut norm_an = 0.0;
        for k in 0..model.params[ti].data.len() {
            let orig = model.params[ti].data[k];
            model.params[ti].data[k] = orig + eps;
            let (lp, _, _) = model.loss_and_gradients(&batch, L2, false, 1234).unwrap();
            model.params[ti].data[k] = orig - eps;
            let (lm, _, _) = model.loss_and_gradients(&batch, L2, false, 1234).unwrap();
            model.params[ti].data[k] = orig;
            let fd = (lp - lm) / (2.0 * eps);
            let an = grads[ti].data[k];
            diff += (fd - an) * (fd - an);
            norm_fd += fd * fd;
            norm_an += an * an;
        }
        let rel = diff.sqrt() / norm_fd.sqrt().max(norm_an.sqrt()).max(1e-300);
        out.push((model.params[ti].name.clone(), rel));
    }
    out
}

#[test]
fn positive_branch_matches_central_differences() {
    for seed in [3, 4, 5, 6, 7, 8] {
        for (name, rel) in check(model_at(0.0, seed, 1.0), seed, 2, EPS) {
            assert!(rel < 1e-4, "{name}: relative error {rel:e}");
        }
    }
}

#[test]
fn negative_branch_matches_central_differences() {
    for seed in [3, 4, 5, 6, 7, 8] {
        for (name, rel) in check(model_at(0.0, seed, -1.0), seed, 2, EPS) {
            assert!(rel < 1e-4, "{name}: relative error {rel:e}");
        }
    }
}

#[test]
fn fixed_dropout_mask_matches_central_differences() {
    for (name, rel) in check(model_at(0.5, 8, 1.0), 8, 2, EPS) {
        assert!(rel < 1e-4, "{name}: relative error {rel:e}");
    }
}

#[test]
fn default_init_matches_small_step_differences() {
    // At a generic point kinks sit within 1e-3 of some activations; a small
    // step stays on one linear piece.
    let mut m = Cnn::<f64>::new(CnnArchitecture::reduced(5), 11).unwrap();
    m.arch.dropout = 0.0;
    for (name, rel) in check(m, 11, 4, 1e-6) {
        assert!(rel < 1e-4, "{name}: relative error {rel:e}");
    }
}
