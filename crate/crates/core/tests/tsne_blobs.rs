mod support;

use support::oracles::{row_perplexity, separation_ratio, three_blobs};
use taxonomist_core::reduce::{conditional_probabilities, tsne_2d, TsneParams};

#[test]
fn separated_blobs_stay_separated() {
    let m = three_blobs(2024);
    let params = TsneParams {
        seed: 7,
        ..Default::default()
    };
    let out = tsne_2d(&m, &params).unwrap();
    let d = &out.diagnostics;
    assert!(d.final_kl.unwrap() < d.kl_after_exaggeration.unwrap());
    let ratio = separation_ratio(&out.coords);
    eprintln!("separation ratio {ratio:.3}, kl {:.4} -> {:.4}", d.kl_after_exaggeration.unwrap(), d.final_kl.unwrap());
    assert!(ratio > 3.0, "separation ratio {ratio}");
}

#[test]
fn blob_rows_hit_perplexity_30() {
    let cond = conditional_probabilities(&three_blobs(2024), 30.0);
    let n = cond.n;
    for i in 0..n {
        let perp = row_perplexity(&cond.p[i * n..(i + 1) * n]);
        assert!((perp - 30.0).abs() < 1e-4, "row {i}: {perp}");
    }
}
