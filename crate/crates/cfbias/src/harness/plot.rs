use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::sweep::BiasRow;
use crate::metrics::MetricsRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 32.0;
const MARGIN_B: f64 = 48.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

struct Curve {
    label: String,
    /// (beta index, mean, std) per grid point with data.
    points: Vec<(usize, f64, f64)>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

fn render_panel(title: &str, betas: &[f64], curves: &[Curve]) -> String {
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in curves {
        for &(_, m, s) in &c.points {
            lo = lo.min(m - s);
            hi = hi.max(m + s);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    // betas are placed at equal index spacing: the grid is geometric, so
    // index position approximates a log axis while keeping beta = 0
    let x_of = |bi: usize| -> f64 {
        if betas.len() == 1 {
            MARGIN_L + plot_w / 2.0
        } else {
            MARGIN_L + plot_w * bi as f64 / (betas.len() - 1) as f64
        }
    };
    let y_of = |v: f64| -> f64 { MARGIN_T + plot_h * (1.0 - (v - lo) / (hi - lo)) };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        title
    ));

    // axes
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        MARGIN_L,
        MARGIN_T + plot_h,
        MARGIN_L + plot_w,
        MARGIN_T + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        MARGIN_L,
        MARGIN_T,
        MARGIN_L,
        MARGIN_T + plot_h
    ));

    for (bi, beta) in betas.iter().enumerate() {
        let x = x_of(bi);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            fmt(x),
            MARGIN_T + plot_h,
            fmt(x),
            MARGIN_T + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            fmt(x),
            MARGIN_T + plot_h + 20.0,
            beta
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">bias scale</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0
    ));
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let y = y_of(v);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            MARGIN_L - 5.0,
            fmt(y),
            MARGIN_L,
            fmt(y)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 8.0,
            fmt(y + 4.0),
            fmt(v)
        ));
    }

    for (ci, curve) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        if curve.points.len() > 1 {
            // one-sigma band
            let mut band = String::from("<polygon points=\"");
            for &(bi, m, s) in &curve.points {
                band.push_str(&format!("{},{} ", fmt(x_of(bi)), fmt(y_of(m + s))));
            }
            for &(bi, m, s) in curve.points.iter().rev() {
                band.push_str(&format!("{},{} ", fmt(x_of(bi)), fmt(y_of(m - s))));
            }
            band.push_str(&format!("\" fill=\"{color}\" opacity=\"0.15\"/>\n"));
            svg.push_str(&band);

            let mut line = String::from("<polyline points=\"");
            for &(bi, m, _) in &curve.points {
                line.push_str(&format!("{},{} ", fmt(x_of(bi)), fmt(y_of(m))));
            }
            line.push_str(&format!(
                "\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
            ));
            svg.push_str(&line);
        }
        for &(bi, m, _) in &curve.points {
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{color}\"/>\n",
                fmt(x_of(bi)),
                fmt(y_of(m))
            ));
        }
        let ly = MARGIN_T + 14.0 * ci as f64 + 10.0;
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            WIDTH - MARGIN_R + 10.0,
            fmt(ly - 9.0)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            WIDTH - MARGIN_R + 24.0,
            fmt(ly),
            curve.label
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect()
}

fn unique_in_order<T: Clone + PartialEq>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

const LEARNER_METRICS: [&str; 9] = [
    "pehe",
    "rmse_f",
    "rmse_cf",
    "rmse_y0_cf",
    "rmse_y1_cf",
    "prec_ass_pi",
    "prec_ass_model",
    "attr_pred",
    "attr_prog",
];

fn metric_of(r: &MetricsRow, name: &str) -> Option<f64> {
    match name {
        "pehe" => r.pehe,
        "rmse_f" => r.rmse_f,
        "rmse_cf" => r.rmse_cf,
        "rmse_y0_cf" => r.rmse_y0_cf,
        "rmse_y1_cf" => r.rmse_y1_cf,
        "prec_ass_pi" => r.prec_ass_pi,
        "prec_ass_model" => r.prec_ass_model,
        "attr_pred" => r.attr_pred,
        "attr_prog" => r.attr_prog,
        _ => None,
    }
}

/// Renders one SVG per (dataset, policy source, metric): the five bias
/// curves from the bias rows, and per-learner mean +/- one-std curves for
/// every populated learner metric. Returns the written paths.
pub fn emit_plots(
    rows: &[MetricsRow],
    bias_rows: &[BiasRow],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if rows.is_empty() && bias_rows.is_empty() {
        eprintln!("warning: nothing to plot");
        return Ok(Vec::new());
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::FileWrite {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let mut written = Vec::new();

    let datasets = unique_in_order(
        bias_rows
            .iter()
            .map(|r| r.dataset.clone())
            .chain(rows.iter().map(|r| r.dataset.clone())),
    );
    for dataset in &datasets {
        let sources = unique_in_order(
            bias_rows
                .iter()
                .filter(|r| &r.dataset == dataset)
                .map(|r| r.policy_source.clone())
                .chain(
                    rows.iter()
                        .filter(|r| &r.dataset == dataset)
                        .map(|r| r.policy_source.clone()),
                ),
        );
        for source in &sources {
            let mut betas: Vec<f64> = unique_in_order(
                bias_rows
                    .iter()
                    .filter(|r| &r.dataset == dataset && &r.policy_source == source)
                    .map(|r| r.beta)
                    .chain(
                        rows.iter()
                            .filter(|r| &r.dataset == dataset && &r.policy_source == source)
                            .map(|r| r.beta),
                    ),
            );
            betas.sort_by(|a, b| a.partial_cmp(b).unwrap());

            // bias panel: five curves
            let bias_curves: Vec<Curve> = [
                ("b_y0", 0),
                ("b_y1", 1),
                ("b_effect", 2),
                ("b_joint", 3),
                ("b_x", 4),
            ]
            .iter()
            .map(|&(label, which)| {
                let mut points = Vec::new();
                for (bi, &beta) in betas.iter().enumerate() {
                    let values: Vec<f64> = bias_rows
                        .iter()
                        .filter(|r| {
                            &r.dataset == dataset
                                && &r.policy_source == source
                                && r.beta == beta
                                && r.status == "ok"
                        })
                        .filter_map(|r| {
                            r.report.as_ref().map(|b| match which {
                                0 => b.b_y0,
                                1 => b.b_y1,
                                2 => b.b_effect,
                                3 => b.b_joint,
                                _ => b.b_x,
                            })
                        })
                        .collect();
                    if !values.is_empty() {
                        let (m, s) = mean_std(&values);
                        points.push((bi, m, s));
                    }
                }
                Curve {
                    label: label.to_string(),
                    points,
                }
            })
            .collect();
            if bias_curves.iter().any(|c| !c.points.is_empty()) {
                let path = out_dir.join(format!(
                    "{}_{}_bias.svg",
                    sanitize(dataset),
                    sanitize(source)
                ));
                let svg = render_panel(&format!("{dataset} / {source} / bias"), &betas, &bias_curves);
                fs::write(&path, svg).map_err(|e| Error::FileWrite {
                    path: path.clone(),
                    source: e,
                })?;
                written.push(path);
            }

            // one panel per learner metric
            let learners = unique_in_order(
                rows.iter()
                    .filter(|r| &r.dataset == dataset && &r.policy_source == source)
                    .map(|r| r.learner.clone()),
            );
            for metric in LEARNER_METRICS {
                let curves: Vec<Curve> = learners
                    .iter()
                    .filter_map(|learner| {
                        let mut points = Vec::new();
                        for (bi, &beta) in betas.iter().enumerate() {
                            let values: Vec<f64> = rows
                                .iter()
                                .filter(|r| {
                                    &r.dataset == dataset
                                        && &r.policy_source == source
                                        && &r.learner == learner
                                        && r.beta == beta
                                        && r.status == "ok"
                                })
                                .filter_map(|r| metric_of(r, metric))
                                .collect();
                            if !values.is_empty() {
                                let (m, s) = mean_std(&values);
                                points.push((bi, m, s));
                            }
                        }
                        (!points.is_empty()).then_some(Curve {
                            label: learner.clone(),
                            points,
                        })
                    })
                    .collect();
                if curves.is_empty() {
                    continue;
                }
                let path = out_dir.join(format!(
                    "{}_{}_{}.svg",
                    sanitize(dataset),
                    sanitize(source),
                    sanitize(metric)
                ));
                let svg = render_panel(
                    &format!("{dataset} / {source} / {metric}"),
                    &betas,
                    &curves,
                );
                fs::write(&path, svg).map_err(|e| Error::FileWrite {
                    path: path.clone(),
                    source: e,
                })?;
                written.push(path);
            }
        }
    }
    if written.is_empty() {
        eprintln!("warning: no plottable series found");
    }
    Ok(written)
}
