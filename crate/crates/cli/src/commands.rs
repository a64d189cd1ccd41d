use std::collections::HashMap;
use std::io::{BufReader, Write};
use std::path::Path;

use ropelab::attention::{
    allones_attention_mass, bucket_positional_loss, gradient_check, make_first_sentence_task,
    probe_mass_csv, score_first_sentence, AttentionConfig, FirstSentenceScore, ProbeTask,
};
use ropelab::export::{csv_table, fmt_f64};
use ropelab::pe::{
    decay_curve, embedding_drift, gaussian_vectors, helix_trace, min_pairwise_distance,
};
use ropelab::scaling::{
    calibrate_cost_ratio, curriculum_flops, doubling_loss_factor, fit_power_law, predict_loss,
    prediction_csv, CurriculumSchedule, DoublingFactor, LossPoint, PowerLawFit,
};
use ropelab::selfinstruct::{
    build_instance, chunk_document, extract_qa, pack_short_instances, pad_long_instance,
    read_ndjson, render_qa_prompt, DocumentChunk, DocumentRecord, QAPair, QaStyle,
    SplitTokenizer, Tokenizer, TrainingInstance,
};
use ropelab::theory::{
    c_d, c_d_mean, granularity_compare, limit_bounds, theta1_relative_difference,
    verify_consecutive_similarity, LimitBounds,
};
use ropelab::PeVariant;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::args::{Action, Format, PackMode};
use crate::{CliError, Command};

type Out = Result<String, CliError>;

fn pretty<T: Serialize>(value: &T) -> Out {
    let mut s = serde_json::to_string_pretty(value).map_err(CliError::domain)?;
    s.push('\n');
    Ok(s)
}

fn ndjson<T: Serialize>(items: &[T]) -> Out {
    let mut buf = Vec::new();
    ropelab::selfinstruct::write_ndjson(&mut buf, items).map_err(|e| CliError::io("output", e))?;
    String::from_utf8(buf).map_err(|e| CliError::io("output", e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path.display(), e))?;
    read_ndjson(BufReader::new(file)).map_err(|e| CliError::io(path.display(), e))
}

/// Numeric CSV rows with at least `min_cols` columns. A first line that does
/// not parse is taken as a header.
fn read_numeric_csv(path: &Path, min_cols: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) if row.len() >= min_cols => rows.push(row),
            Ok(_) => {
                return Err(CliError::io(
                    format!("{}:{}", path.display(), i + 1),
                    format!("expected at least {min_cols} columns"),
                ))
            }
            Err(_) if i == 0 => {}
            Err(e) => return Err(CliError::io(format!("{}:{}", path.display(), i + 1), e)),
        }
    }
    Ok(rows)
}

fn csv_row(header: &[&str], values: Vec<String>) -> String {
    csv_table(header, std::iter::once(values))
}

pub(crate) fn execute(cmd: &Command, stderr: &mut dyn Write) -> Out {
    let json = cmd.format == Format::Json;
    let variant = || -> Result<PeVariant, CliError> {
        cmd.action
            .pe_args()
            .expect("pe command")
            .variant()
            .map_err(CliError::domain)
    };
    match &cmd.action {
        Action::Decay {
            max_dist,
            step,
            normalized,
            ..
        } => {
            if *step == 0 {
                return Err(CliError::domain(ropelab::PeError::InvalidRange("--step must be positive".into())));
            }
            let distances: Vec<i64> = (0..=i64::from(*max_dist)).step_by(*step as usize).collect();
            let curve = decay_curve(&variant()?, &distances, *normalized).map_err(CliError::domain)?;
            if json {
                pretty(&curve)
            } else {
                Ok(curve.to_csv())
            }
        }
        Action::Helix {
            a,
            t_start,
            t_end,
            samples,
        } => {
            let trace = helix_trace(*a, *t_start, *t_end, *samples).map_err(CliError::domain)?;
            if json {
                pretty(&trace)
            } else {
                Ok(trace.to_csv())
            }
        }
        Action::Bounds { .. } => bounds(&variant()?, json),
        Action::TheoremCheck { position, seed, .. } => {
            let v = variant()?;
            let x = gaussian_vectors(1, v.head_dim(), *seed).remove(0);
            let check = verify_consecutive_similarity(&v, &x, *position).map_err(CliError::domain)?;
            if json {
                return pretty(&check);
            }
            Ok(csv_row(
                &[
                    "variant",
                    "position",
                    "observed_similarity",
                    "lower_bound",
                    "upper_bound",
                    "c_d",
                    "component_lower_bound",
                    "component_upper_bound",
                ],
                vec![
                    check.variant.label(),
                    check.position.to_string(),
                    fmt_f64(check.observed_similarity),
                    fmt_f64(check.lower_bound),
                    fmt_f64(check.upper_bound),
                    fmt_f64(check.c_d),
                    fmt_f64(check.component_lower_bound),
                    fmt_f64(check.component_upper_bound),
                ],
            ))
        }
        Action::Granularity {
            base,
            dim,
            alpha,
            beta,
            positions,
            seed,
            vectors,
        } => granularity(*base, *dim, *alpha, *beta, *positions, *seed, *vectors, json),
        Action::Theta1 { dim, from, to } => {
            let r = theta1_relative_difference(*dim, *from, *to).map_err(CliError::domain)?;
            if json {
                #[derive(Serialize)]
                struct Theta1 {
                    d: usize,
                    b_old: f64,
                    b_new: f64,
                    relative_difference: f64,
                }
                pretty(&Theta1 {
                    d: *dim,
                    b_old: *from,
                    b_new: *to,
                    relative_difference: r,
                })
            } else {
                Ok(csv_row(
                    &["d", "b_old", "b_new", "relative_difference"],
                    vec![dim.to_string(), fmt_f64(*from), fmt_f64(*to), fmt_f64(r)],
                ))
            }
        }
        Action::Fit { input } => {
            let points = read_numeric_csv(input, 2)?
                .into_iter()
                .map(|r| {
                    if r[0] >= 0.0 && r[0].fract() == 0.0 {
                        Ok(LossPoint::new(r[0] as u64, r[1]))
                    } else {
                        Err(CliError::io(input.display(), format!("context length {} is not a whole number", r[0])))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            let fit = fit_power_law(&points).map_err(CliError::domain)?;
            if json {
                pretty(&fit)
            } else {
                Ok(csv_row(
                    &["alpha", "beta", "gamma", "rmse", "iterations", "converged"],
                    vec![
                        fmt_f64(fit.alpha),
                        fmt_f64(fit.beta),
                        fmt_f64(fit.gamma),
                        fmt_f64(fit.rmse),
                        fit.iterations.to_string(),
                        fit.converged.to_string(),
                    ],
                ))
            }
        }
        Action::Predict {
            fit,
            alpha,
            beta,
            gamma,
            contexts,
        } => {
            let fit = match (fit, alpha, beta, gamma) {
                (Some(path), ..) => serde_json::from_str::<PowerLawFit>(&read_text(path)?)
                    .map_err(|e| CliError::io(path.display(), e))?,
                (None, Some(a), Some(b), Some(g)) => {
                    PowerLawFit::from_params(*a, *b, *g).map_err(CliError::domain)?
                }
                _ => {
                    return Err(CliError::domain(ropelab::scaling::ScalingError::InvalidParameter(
                        "give --fit or all of --alpha, --beta, --gamma".into(),
                    )))
                }
            };
            if !json {
                return prediction_csv(&fit, contexts).map_err(CliError::domain);
            }
            #[derive(Serialize)]
            struct Prediction {
                context_length: u64,
                predicted_loss: f64,
            }
            #[derive(Serialize)]
            struct Report {
                fit: PowerLawFit,
                doubling: DoublingFactor,
                predictions: Vec<Prediction>,
            }
            let predictions = contexts
                .iter()
                .map(|&c| {
                    predict_loss(&fit, c as f64).map(|l| Prediction {
                        context_length: c,
                        predicted_loss: l,
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(CliError::domain)?;
            pretty(&Report {
                fit,
                doubling: doubling_loss_factor(&fit),
                predictions,
            })
        }
        Action::Flops {
            p,
            cost_ratio,
            table,
            total_tokens,
            long_token_cost,
        } => {
            let (ratio, calibrated) = match (table, cost_ratio) {
                (Some(path), _) => {
                    let rows: Vec<(f64, f64)> =
                        read_numeric_csv(path, 2)?.into_iter().map(|r| (r[0], r[1])).collect();
                    (calibrate_cost_ratio(&rows).map_err(CliError::domain)?, true)
                }
                (None, Some(r)) => (*r, false),
                (None, None) => unreachable!("clap requires --cost-ratio or --table"),
            };
            let schedule =
                CurriculumSchedule::new(*p, ratio, *total_tokens).map_err(CliError::domain)?;
            let est = curriculum_flops(&schedule, *long_token_cost).map_err(CliError::domain)?;
            #[derive(Serialize)]
            struct Report {
                switch_fraction: f64,
                cost_ratio: f64,
                calibrated: bool,
                relative: f64,
                #[serde(skip_serializing_if = "Option::is_none")]
                absolute_flops: Option<f64>,
            }
            let report = Report {
                switch_fraction: *p,
                cost_ratio: ratio,
                calibrated,
                relative: est.total_flops_relative,
                absolute_flops: est.absolute_flops,
            };
            if json {
                pretty(&report)
            } else {
                Ok(csv_row(
                    &["switch_fraction", "cost_ratio", "calibrated", "relative", "absolute_flops"],
                    vec![
                        fmt_f64(report.switch_fraction),
                        fmt_f64(report.cost_ratio),
                        report.calibrated.to_string(),
                        fmt_f64(report.relative),
                        report.absolute_flops.map(fmt_f64).unwrap_or_default(),
                    ],
                ))
            }
        }
        Action::ProbeMass {
            seq_len, target, ..
        } => {
            let v = variant()?;
            let rows = seq_len
                .iter()
                .map(|&l| allones_attention_mass(&v, l, *target).map(|m| (l, v, m)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(CliError::domain)?;
            if !json {
                return Ok(probe_mass_csv(&rows));
            }
            #[derive(Serialize)]
            struct Row {
                seq_len: usize,
                target: usize,
                variant: PeVariant,
                mass: f64,
            }
            pretty(
                &rows
                    .into_iter()
                    .map(|(seq_len, variant, mass)| Row {
                        seq_len,
                        target: *target,
                        variant,
                        mass,
                    })
                    .collect::<Vec<_>>(),
            )
        }
        Action::GradCheck {
            seq_len,
            seed,
            causal,
            ..
        } => {
            let config = AttentionConfig::new(variant()?, *seq_len, *causal).map_err(CliError::domain)?;
            let errors = seed
                .iter()
                .map(|&s| gradient_check(&config, s).map(|e| (s, e)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(CliError::domain)?;
            if !json {
                return Ok(csv_table(
                    &["seed", "max_relative_error"],
                    errors.iter().map(|(s, e)| vec![s.to_string(), fmt_f64(*e)]),
                ));
            }
            #[derive(Serialize)]
            struct PerSeed {
                seed: u64,
                max_relative_error: f64,
            }
            #[derive(Serialize)]
            struct Report {
                variant: PeVariant,
                seq_len: usize,
                causal: bool,
                seeds: Vec<PerSeed>,
                max_relative_error: f64,
            }
            pretty(&Report {
                variant: config.variant,
                seq_len: *seq_len,
                causal: *causal,
                max_relative_error: errors.iter().map(|e| e.1).fold(0.0, f64::max),
                seeds: errors
                    .into_iter()
                    .map(|(seed, max_relative_error)| PerSeed {
                        seed,
                        max_relative_error,
                    })
                    .collect(),
            })
        }
        Action::FsrTask {
            sentences,
            tokens_per_sentence,
            seed,
            response,
        } => {
            let task = make_first_sentence_task(*sentences, *tokens_per_sentence, *seed)
                .map_err(CliError::domain)?;
            let score = match response {
                Some(path) => {
                    let ids = read_text(path)?
                        .split_whitespace()
                        .map(str::parse::<u32>)
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| CliError::io(path.display(), e))?;
                    Some(score_first_sentence(&task, &ids))
                }
                None => None,
            };
            #[derive(Serialize)]
            struct Report {
                task: ProbeTask,
                #[serde(skip_serializing_if = "Option::is_none")]
                score: Option<FirstSentenceScore>,
            }
            let mut s = serde_json::to_string(&Report { task, score }).map_err(CliError::domain)?;
            s.push('\n');
            Ok(s)
        }
        Action::BucketLoss { input, width } => {
            let losses: Vec<f64> = read_numeric_csv(input, 1)?
                .into_iter()
                .map(|r| *r.last().expect("non-empty row"))
                .collect();
            let b = bucket_positional_loss(&losses, *width).map_err(CliError::domain)?;
            if json {
                pretty(&b)
            } else {
                Ok(b.to_csv())
            }
        }
        Action::DatagenChunk {
            input,
            chunk_tokens,
            overlap,
        } => {
            let tok = SplitTokenizer::new();
            let mut chunks = Vec::new();
            for doc in read_records::<DocumentRecord>(input)? {
                chunks.extend(
                    chunk_document(&doc.doc_id, &doc.text, &tok, *chunk_tokens, *overlap)
                        .map_err(CliError::domain)?,
                );
            }
            ndjson(&chunks)
        }
        Action::DatagenRender { input, style } => {
            #[derive(Serialize)]
            struct Rendered {
                doc_id: String,
                chunk_index: usize,
                style: QaStyle,
                prompt: String,
            }
            let style = QaStyle::from(*style);
            let rendered: Vec<Rendered> = read_records::<DocumentChunk>(input)?
                .into_iter()
                .map(|c| Rendered {
                    prompt: render_qa_prompt(&c, style),
                    doc_id: c.doc_id,
                    chunk_index: c.chunk_index,
                    style,
                })
                .collect();
            ndjson(&rendered)
        }
        Action::DatagenExtract {
            input,
            style,
            docs,
            chunks,
            max_context,
            loss_policy,
        } => {
            #[derive(Deserialize)]
            struct Response {
                doc_id: String,
                chunk_index: usize,
                response: String,
            }
            #[derive(Serialize)]
            struct Extracted {
                doc_id: String,
                chunk_index: usize,
                #[serde(flatten)]
                pair: QAPair,
            }
            let style = QaStyle::from(*style);
            let mut pairs = Vec::new();
            for (i, r) in read_records::<Response>(input)?.into_iter().enumerate() {
                match extract_qa(&r.response, style) {
                    Ok(pair) => pairs.push(Extracted {
                        doc_id: r.doc_id,
                        chunk_index: r.chunk_index,
                        pair,
                    }),
                    Err(e) => {
                        let _ = writeln!(stderr, "warning: record {}: skipped: {e}", i + 1);
                    }
                }
            }
            let (Some(docs), Some(chunks), Some(max_context)) = (docs, chunks, max_context) else {
                return ndjson(&pairs);
            };
            let texts: HashMap<String, String> = read_records::<DocumentRecord>(docs)?
                .into_iter()
                .map(|d| (d.doc_id, d.text))
                .collect();
            let chunk_map: HashMap<(String, usize), DocumentChunk> = read_records::<DocumentChunk>(chunks)?
                .into_iter()
                .map(|c| ((c.doc_id.clone(), c.chunk_index), c))
                .collect();
            let tok = SplitTokenizer::new();
            let instances = pairs
                .iter()
                .map(|p| {
                    let missing = || CliError::io(input.display(), format!("no chunk {} of document {:?}", p.chunk_index, p.doc_id));
                    let text = texts.get(&p.doc_id).ok_or_else(missing)?;
                    let chunk = chunk_map.get(&(p.doc_id.clone(), p.chunk_index)).ok_or_else(missing)?;
                    build_instance(text, chunk, &p.pair, &tok, *max_context, (*loss_policy).into())
                        .map_err(CliError::domain)
                })
                .collect::<Result<Vec<TrainingInstance>, _>>()?;
            ndjson(&instances)
        }
        Action::DatagenPack {
            input,
            seq_len,
            mode,
        } => {
            let instances = read_records::<TrainingInstance>(input)?;
            match mode {
                PackMode::Pack => {
                    let batch = pack_short_instances(&instances, *seq_len).map_err(CliError::domain)?;
                    let mut s = serde_json::to_string(&batch).map_err(CliError::domain)?;
                    s.push('\n');
                    Ok(s)
                }
                PackMode::Pad => {
                    let pad = SplitTokenizer::new().pad_id();
                    let padded = instances
                        .iter()
                        .map(|inst| pad_long_instance(inst, *seq_len, pad))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(CliError::domain)?;
                    ndjson(&padded)
                }
            }
        }
    }
}

fn bounds(v: &PeVariant, json: bool) -> Out {
    #[derive(Serialize)]
    struct Report {
        #[serde(flatten)]
        bounds: LimitBounds,
        c_d: f64,
        c_d_mean: f64,
    }
    let report = Report {
        bounds: limit_bounds(v).map_err(CliError::domain)?,
        c_d: c_d(v).map_err(CliError::domain)?,
        c_d_mean: c_d_mean(v).map_err(CliError::domain)?,
    };
    if json {
        return pretty(&report);
    }
    Ok(csv_row(
        &["variant", "lower", "upper", "approximation", "c_d", "c_d_mean"],
        vec![
            v.label(),
            fmt_f64(report.bounds.lower),
            fmt_f64(report.bounds.upper),
            fmt_f64(report.bounds.approximation),
            fmt_f64(report.c_d),
            fmt_f64(report.c_d_mean),
        ],
    ))
}

#[allow(clippy::too_many_arguments)]
fn granularity(
    base: f64,
    dim: usize,
    alpha: f64,
    beta: f64,
    positions: Option<usize>,
    seed: u64,
    vectors: usize,
    json: bool,
) -> Out {
    let pi = PeVariant::pi(base, dim, alpha).map_err(CliError::domain)?;
    let abf = PeVariant::abf(base, dim, beta).map_err(CliError::domain)?;
    let cmp = granularity_compare(&pi, &abf).map_err(CliError::domain)?;

    #[derive(Serialize)]
    struct BruteForce {
        positions: usize,
        pi_min_distance: f64,
        abf_min_distance: f64,
        pi_drift: f64,
        abf_drift: f64,
    }
    let brute = match positions {
        None => None,
        Some(n) => {
            let rope = PeVariant::rope(base, dim).map_err(CliError::domain)?;
            let xs = gaussian_vectors(vectors.max(1), dim, seed);
            let run = || -> Result<BruteForce, ropelab::PeError> {
                Ok(BruteForce {
                    positions: n,
                    pi_min_distance: min_pairwise_distance(&pi, &xs[0], n)?.distance,
                    abf_min_distance: min_pairwise_distance(&abf, &xs[0], n)?.distance,
                    pi_drift: embedding_drift(&rope, &pi, &xs, n, n)?,
                    abf_drift: embedding_drift(&rope, &abf, &xs, n, n)?,
                })
            };
            Some(run().map_err(CliError::domain)?)
        }
    };
    if json {
        #[derive(Serialize)]
        struct Report {
            pi_granularity: f64,
            abf_granularity: f64,
            ratio: f64,
            #[serde(skip_serializing_if = "Option::is_none", flatten)]
            brute_force: Option<BruteForce>,
        }
        return pretty(&Report {
            pi_granularity: cmp.pi_granularity,
            abf_granularity: cmp.abf_granularity,
            ratio: cmp.ratio,
            brute_force: brute,
        });
    }
    let mut header = vec!["pi_granularity", "abf_granularity", "ratio"];
    let mut row = vec![
        fmt_f64(cmp.pi_granularity),
        fmt_f64(cmp.abf_granularity),
        fmt_f64(cmp.ratio),
    ];
    if let Some(b) = brute {
        header.extend(["positions", "pi_min_distance", "abf_min_distance", "pi_drift", "abf_drift"]);
        row.extend([
            b.positions.to_string(),
            fmt_f64(b.pi_min_distance),
            fmt_f64(b.abf_min_distance),
            fmt_f64(b.pi_drift),
            fmt_f64(b.abf_drift),
        ]);
    }
    Ok(csv_row(&header, row))
}
