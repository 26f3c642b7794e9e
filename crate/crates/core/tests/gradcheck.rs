use r2d2_core::nn::gradcheck::{check_graph, random_tensor, randomize, GradCheckConfig, GradCheckReport};
use r2d2_core::nn::{build, Arch, ArchConfig, Graph, Op, ParamStore};

const TOL: f64 = 1e-4;

fn assert_report(label: &str, r: &GradCheckReport) {
    for t in &r.tensors {
        assert!(t.checked > 0, "{label}: nothing checked for {}", t.name);
        assert!(t.skipped <= t.checked, "{label}: {} skipped {} of {}", t.name, t.skipped, t.checked + t.skipped);
    }
    let worst = r.worst().unwrap();
    assert!(worst.rel_error < TOL, "{label}: {} rel error {:e}", worst.name, worst.rel_error);
}

fn conv_params(p: &mut ParamStore<f64>, name: &str, wshape: Vec<usize>, cout: usize) -> (usize, usize) {
    let w = p.add(format!("{name}.weight"), wshape);
    let b = p.add(format!("{name}.bias"), vec![cout]);
    (w, b)
}

fn check_layer(label: &str, graph: Graph, mut params: ParamStore<f64>, cin: usize, side: usize) {
    randomize(&mut params, 0.5, 1);
    let x = random_tensor(cin, side, side, 2);
    let r = check_graph(&graph, &params, &x, GradCheckConfig { samples_per_tensor: 64, ..Default::default() }).unwrap();
    assert_report(label, &r);
}

#[test]
fn conv3x3_layer() {
    let mut p = ParamStore::default();
    let (weight, bias) = conv_params(&mut p, "c", vec![4, 3, 3, 3], 4);
    let mut g = Graph::new();
    g.push(Op::Conv3 { input: 0, weight, bias, cout: 4 });
    check_layer("conv3x3", g, p, 3, 16);
}

#[test]
fn conv1x1_layer() {
    let mut p = ParamStore::default();
    let (weight, bias) = conv_params(&mut p, "c", vec![5, 3], 5);
    let mut g = Graph::new();
    g.push(Op::Conv1 { input: 0, weight, bias, cout: 5 });
    check_layer("conv1x1", g, p, 3, 16);
}

#[test]
fn transposed_conv_layer() {
    let mut p = ParamStore::default();
    let (weight, bias) = conv_params(&mut p, "t", vec![3, 2, 2, 2], 2);
    let mut g = Graph::new();
    g.push(Op::ConvT2 { input: 0, weight, bias, cout: 2 });
    check_layer("convT", g, p, 3, 8);
}

#[test]
fn average_pool_layer() {
    let mut g = Graph::new();
    g.push(Op::AvgPool2 { input: 0 });
    check_layer("avgpool", g, ParamStore::default(), 3, 16);
}

#[test]
fn relu_layer() {
    let mut g = Graph::new();
    g.push(Op::Relu { input: 0 });
    check_layer("relu", g, ParamStore::default(), 2, 16);
}

#[test]
fn skip_concat_and_add() {
    let mut p = ParamStore::default();
    let (weight, bias) = conv_params(&mut p, "c", vec![2, 2], 2);
    let mut g = Graph::new();
    let a = g.push(Op::Conv1 { input: 0, weight, bias, cout: 2 });
    let c = g.push(Op::Concat { a, b: 0 });
    let (w2, b2) = conv_params(&mut p, "d", vec![2, 4], 2);
    let d = g.push(Op::Conv1 { input: c, weight: w2, bias: b2, cout: 2 });
    g.push(Op::Add { a: d, b: 0 });
    check_layer("concat+add", g, p, 2, 16);
}

fn check_arch(arch: Arch) {
    let cfg = ArchConfig { base_channels: 4, ..ArchConfig::for_arch(arch) };
    let mut net = build::<f64>(&cfg, 0).unwrap();
    // He init everywhere, then make the final layer live so every path carries gradient.
    let final_w = net.final_weight();
    let mut rng_store = net.params.clone();
    randomize(&mut rng_store, 0.3, 5);
    net.params.get_mut(final_w).copy_from_slice(rng_store.get(final_w));
    for i in 0..net.params.len() {
        if net.params.tensors[i].name.ends_with(".bias") {
            net.params.get_mut(i).copy_from_slice(rng_store.get(i));
        }
    }
    let x = random_tensor(3, 16, 16, 9);
    let r = check_graph(&net.graph, &net.params, &x, GradCheckConfig { samples_per_tensor: 12, freeze_relu_masks: true, ..Default::default() }).unwrap();
    assert_report(&arch.to_string(), &r);
}

#[test]
fn unet_full_architecture() {
    check_arch(Arch::Unet);
}

#[test]
fn uwdsr_full_architecture() {
    check_arch(Arch::Uwdsr);
}
