// temporary probe: prop-1 margins vs joint bin cap
use cfbias::bias::*;
use cfbias::dgp::{gen_toy, ToyKind};
use cfbias::numerics::{auto_bins_capped, mix_seed, BinEdges};
use cfbias::policy::{assign, PolicySource, PolicySpec};

fn joint_with_cap(a: &[u8], y0: &[f64], y1: &[f64], cap: usize) -> f64 {
    let bins0 = auto_bins_capped(y0, cap).unwrap();
    let bins1 = auto_bins_capped(y1, cap).unwrap();
    let k1 = bins1.k();
    let cells: Vec<f64> = y0.iter().zip(y1).map(|(&u, &v)| (bins0.bin_of(u) * k1 + bins1.bin_of(v)) as f64).collect();
    let cell_bins = BinEdges::from_edges((0..=bins0.k() * k1).map(|c| c as f64 - 0.5).collect()).unwrap();
    let mi = mutual_information_with_bins(a, &cells, &cell_bins).unwrap();
    (mi / entropy_of_assignment(a)).clamp(0.0, 1.0)
}

fn main() {
    let toys = [ToyKind::Toy1, ToyKind::Toy2, ToyKind::Toy3, ToyKind::Toy4];
    let sources = [PolicySource::Y0, PolicySource::Y1, PolicySource::Effect, PolicySource::ToyCanonical];
    for &cap in &[8usize, 10, 12, 14, 16] {
        let mut worst1 = f64::INFINITY; // b_x - b_joint (want > -0.05)
        let mut worst2 = f64::INFINITY; // b_joint - max_single (want > -0.05)
        let mut w1cell = String::new();
        let mut w2cell = String::new();
        for &toy in &toys {
            for seed in 0..3u64 {
                let ds = gen_toy(toy, 5000, mix_seed(7000, seed), 0.0).unwrap();
                for &source in &sources {
                    for &beta in &[0.0, 2.0, 8.0, 16.0] {
                        let policy = PolicySpec { source, beta, m: 2, seed: mix_seed(seed, 11 + beta as u64) };
                        let obs = match assign(&ds, &policy) { Ok(o) => o, Err(_) => continue };
                        let r = bias_report(&obs).unwrap();
                        let bj = joint_with_cap(&obs.a, &ds.y0, &ds.y1, cap);
                        let m1 = r.b_x - bj;
                        let m2 = bj - r.b_y0.max(r.b_y1).max(r.b_effect);
                        if m1 < worst1 { worst1 = m1; w1cell = format!("{}/{}/b={beta}/s={seed}", toy.name(), source.name()); }
                        if m2 < worst2 { worst2 = m2; w2cell = format!("{}/{}/b={beta}/s={seed}", toy.name(), source.name()); }
                    }
                }
            }
        }
        println!("cap {cap:2}: worst bx-bjoint = {worst1:+.4} ({w1cell}); worst bjoint-maxsingle = {worst2:+.4} ({w2cell})");
    }
}
