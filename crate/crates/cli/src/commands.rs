use std::f64::consts::E;
use std::fmt::Write as _;

use permanental_core::bounds::{
    asymmetry_constant, diag_bound_scaled, diag_bound_sigma, diag_bound_simple, psi_star, sigma_matrix,
    sudakov_compare, unboundedness_statistic, PointConfig,
};
use permanental_core::gamma_tools::{gamma_tail_exact, tail_lower, tail_upper};
use permanental_core::levy::{
    asymmetry_asymptotics, check_domination, check_h_ratio, classify_log_power, integral_criterion, spectral,
    u_at, u_beta, GProfile, LevyModel,
};
use permanental_core::linalg::{alpha_permanent, invert};
use permanental_core::markov_gen::{green_kernel, random_transient_chain, validate_appendix_lemma};
use permanental_core::permanental_model::{direct_laplace, series_laplace, z_masses};
use permanental_core::sampler::{check_permanental_inequality, empirical_laplace, sample_permanental};
use permanental_core::{DenseMatrix, MMatrixPair};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::io::{emit, num, parse_counts, parse_list, read_matrix, read_spec, read_text, to_json, CliError, CliResult};
use crate::{
    BoundsArgs, ClassifyArgs, Format, GammaTailArgs, GenKernelArgs, KernelFormat, KernelModel, LaplaceArgs, LevyArgs,
    LevyModelArgs, McValidateArgs, Method, PermanentArgs, SampleArgs, UnboundedScanArgs, ValidateKernelArgs, Which,
    ZDistArgs,
};

/// `max |M N - I|`.
fn inverse_residual(m: &DenseMatrix, inv: &DenseMatrix) -> f64 {
    m.matmul(inv).max_abs_diff(&DenseMatrix::identity(m.n()))
}

/// One CSV row per object; keys in sorted order, nested values JSON-encoded.
fn csv_of(values: &[Value]) -> CliResult<String> {
    let Some(Value::Object(first)) = values.first() else {
        return Ok(String::new());
    };
    let keys: Vec<&String> = first.keys().collect();
    let mut out = keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",");
    out.push('\n');
    for v in values {
        let obj = v.as_object().ok_or_else(|| CliError::Internal("csv rows must be objects".into()))?;
        let cells: Vec<String> = keys
            .iter()
            .map(|k| match obj.get(*k) {
                None | Some(Value::Null) => String::new(),
                Some(Value::String(s)) => format!("\"{}\"", s.replace('"', "\"\"")),
                Some(Value::Number(n)) => n.to_string(),
                Some(Value::Bool(b)) => b.to_string(),
                Some(other) => format!("\"{}\"", other.to_string().replace('"', "\"\"")),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn rows_out<T: Serialize>(rows: &[T], format: Format) -> CliResult<String> {
    match format {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let values: Vec<Value> =
                rows.iter().map(serde_json::to_value).collect::<Result<_, _>>().map_err(|e| CliError::Internal(e.to_string()))?;
            csv_of(&values)
        }
    }
}

fn value_out<T: Serialize>(value: &T, format: Format) -> CliResult<String> {
    rows_out(std::slice::from_ref(value), format).map(|s| match format {
        Format::Json => {
            // A single object, not a one-element array.
            let v: Value = serde_json::from_str(&s).expect("round trip");
            let mut t = serde_json::to_string_pretty(&v[0]).expect("serializable");
            t.push('\n');
            t
        }
        Format::Csv => s,
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn permanent(a: PermanentArgs) -> CliResult<()> {
    let m = read_matrix(&a.matrix)?;
    let value = alpha_permanent(&m, a.alpha)?;
    let abs_m = DenseMatrix::from_fn(m.n(), |i, j| m[(i, j)].abs());
    let majorant = alpha_permanent(&abs_m, a.alpha.abs())?;
    let n = m.n();
    let abs_err = (n as f64 + factorial(n)) * f64::EPSILON * majorant;
    emit(&a.out.out, &to_json(&json!({ "n": n, "alpha": a.alpha, "value": value, "abs_err": abs_err }))?)
}

pub fn laplace(a: LaplaceArgs) -> CliResult<()> {
    let spec = read_spec(&a.spec)?;
    let s = parse_list("s", &a.s)?;
    let (name, v) = match a.method {
        Method::Det => ("det", direct_laplace(&spec, &s)?),
        Method::Series => ("series", series_laplace(&spec, &s, a.rel_tol)?),
    };
    emit(
        &a.out.out,
        &to_json(&json!({ "method": name, "s": s, "value": v.value, "rel_err": v.rel_err, "terms_used": v.terms_used }))?,
    )
}

pub fn z_dist(a: ZDistArgs) -> CliResult<()> {
    let spec = read_spec(&a.spec)?;
    let z = z_masses(&spec, a.target)?;
    let limit = a.limit.unwrap_or(z.len()).min(z.len());
    let text = match a.format {
        Format::Json => {
            let entries: Vec<Value> = (0..limit).map(|t| json!({ "k": z.index(t), "mass": z.masses()[t] })).collect();
            to_json(&json!({
                "n": z.n(),
                "alpha": spec.alpha(),
                "target": a.target,
                "covered_mass": z.covered_mass(),
                "tail_bound": z.tail_bound(),
                "max_order": z.max_order(),
                "rho": z.rho(),
                "count": z.len(),
                "entries": entries,
            }))?
        }
        Format::Csv => {
            let mut out = format!("# covered_mass={},tail_bound={}\n", num(z.covered_mass()), num(z.tail_bound()));
            let head: Vec<String> = (1..=z.n()).map(|i| format!("k_{i}")).collect();
            writeln!(out, "{},mass", head.join(",")).unwrap();
            for t in 0..limit {
                for k in z.index(t) {
                    write!(out, "{k},").unwrap();
                }
                writeln!(out, "{}", num(z.masses()[t])).unwrap();
            }
            out
        }
    };
    emit(&a.out.out, &text)
}

pub fn sample(a: SampleArgs) -> CliResult<()> {
    let spec = read_spec(&a.spec)?;
    let batch = sample_permanental(&spec, a.n, a.seed, a.couple)?;
    let n = batch.n();
    let mut head: Vec<String> = (1..=n).map(|i| format!("X_{i}")).collect();
    if a.couple {
        head.extend((1..=n).map(|i| format!("L_{i}")));
        head.extend((1..=n).map(|i| format!("Z_{i}")));
    }
    let mut out = String::with_capacity(batch.len() * n * 24);
    out.push_str(&head.join(","));
    out.push('\n');
    for r in 0..batch.len() {
        let mut cells: Vec<String> = batch.row(r).iter().map(|v| num(*v)).collect();
        if let Some(lower) = batch.lower_row(r) {
            cells.extend(lower.iter().map(|v| num(*v)));
            cells.extend(batch.z_row(r).iter().map(|k| k.to_string()));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    emit(&a.out.out, &out)
}

/// Kronecker points `0.1 + 1.9 frac(j * theta_i)`.
fn default_s_points(n: usize, count: usize) -> Vec<Vec<f64>> {
    let thetas: Vec<f64> = (0..n).map(|i| ((i + 2) as f64).sqrt().fract()).collect();
    (1..=count).map(|j| thetas.iter().map(|t| 0.1 + 1.9 * (j as f64 * t).fract()).collect()).collect()
}

pub fn mc_validate(a: McValidateArgs) -> CliResult<()> {
    let spec = read_spec(&a.spec)?;
    let n = spec.n();
    let points = match &a.s {
        Some(text) => text.split(';').map(|p| parse_list("s", p)).collect::<CliResult<Vec<_>>>()?,
        None => default_s_points(n, a.s_count),
    };
    let lambdas = parse_list("lambdas", &a.lambdas)?;
    let batch = sample_permanental(&spec, a.n, a.seed, true)?;
    let mut within = 0;
    let mut rows = Vec::new();
    for s in &points {
        let emp = empirical_laplace(&batch, s)?;
        let exact = direct_laplace(&spec, s)?;
        let z = (emp.value - exact.value) / emp.se;
        if z.abs() <= 4.0 {
            within += 1;
        }
        rows.push(json!({
            "s": s, "empirical": emp.value, "se": emp.se,
            "exact": exact.value, "exact_rel_err": exact.rel_err, "z_score": z,
        }));
    }
    let violations = (0..batch.len())
        .filter(|&r| {
            let lower = batch.lower_row(r).expect("coupled batch");
            batch.row(r).iter().zip(lower).any(|(x, l)| x < l)
        })
        .count();
    let ineq = check_permanental_inequality(&spec, a.n.max(10_000), a.seed.wrapping_add(1), &lambdas)?;
    let margin_se = ineq.difference / ineq.se;
    emit(
        &a.out.out,
        &to_json(&json!({
            "n_draws": a.n,
            "seed": a.seed,
            "points": rows,
            "within_4se": within,
            "point_count": points.len(),
            "coupling_violations": violations,
            "inequality": ineq,
            "margin_se": margin_se,
        }))?,
    )
}

pub fn gamma_tail(a: GammaTailArgs) -> CliResult<()> {
    if !(a.u > 0.0 && a.v > 0.0 && a.t >= 0.0) {
        return Err(CliError::Usage(format!("need --u > 0, --v > 0, --t >= 0; got ({}, {}, {})", a.u, a.v, a.t)));
    }
    let exact = gamma_tail_exact(a.u, a.v, a.t);
    let lambda = a.v * a.t;
    let mut out = json!({
        "u": a.u, "v": a.v, "t": a.t, "lambda": lambda,
        "exact": exact, "exact_rel_err": 1e-12,
    });
    if a.bounds {
        let side = |r: permanental_core::Result<f64>| match r {
            Ok(v) => json!({ "value": v, "error": Value::Null }),
            Err(e) => json!({ "value": Value::Null, "error": e.to_string() }),
        };
        out["lower"] = side(tail_lower(a.u, lambda));
        out["upper"] = side(tail_upper(a.u, lambda));
    }
    emit(&a.out.out, &to_json(&out)?)
}

pub fn bounds(a: BoundsArgs) -> CliResult<()> {
    let k = read_matrix(&a.kernel)?;
    let pair = MMatrixPair::from_kernel(&k)?;
    let residual = inverse_residual(pair.a(), pair.kernel());
    let result = match a.which {
        Which::Simple => serde_json::to_value(diag_bound_simple(&pair)?),
        Which::Sigma => {
            let c = match a.c {
                Some(c) => c,
                None => asymmetry_constant(&k)?,
            };
            serde_json::to_value(diag_bound_sigma(&pair, c)?)
        }
        Which::Scaled => {
            let k_hat = a.k_hat.unwrap_or_else(|| k.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max));
            serde_json::to_value(diag_bound_scaled(&pair, k_hat)?)
        }
        Which::PsiStar => {
            let points = match &a.points {
                Some(t) => parse_list("points", t)?,
                None => (1..=k.n()).map(|i| i as f64).collect(),
            };
            let config = PointConfig::new(points, k.clone())?;
            let v = psi_star(&config, a.p)?;
            Ok(json!({ "p": a.p, "psi_star": v, "sigma_star2": sigma_matrix(&k).sigma_star2 }))
        }
        Which::Sudakov => serde_json::to_value(sudakov_compare(&pair)?),
    }
    .map_err(|e| CliError::Internal(e.to_string()))?;
    let which = serde_json::to_value(a.which_name()).expect("string");
    emit(&a.out.out, &to_json(&json!({ "which": which, "result": result, "inverse_residual": residual }))?)
}

impl BoundsArgs {
    fn which_name(&self) -> &'static str {
        match self.which {
            Which::Simple => "simple",
            Which::Sigma => "sigma",
            Which::Scaled => "scaled",
            Which::PsiStar => "psi-star",
            Which::Sudakov => "sudakov",
        }
    }
}

#[derive(Deserialize)]
struct TableFile {
    y: Vec<f64>,
    g: Vec<f64>,
}

fn levy_model(m: &LevyModelArgs) -> CliResult<LevyModel> {
    let profile = match &m.table {
        Some(path) => {
            let t: TableFile = serde_json::from_str(&read_text(path)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            GProfile::Tabulated { y: t.y, g: t.g }
        }
        None => GProfile::LogPower { gamma: m.gamma, delta: m.delta, eps_cut: m.eps_cut.unwrap_or(E * E) },
    };
    Ok(LevyModel::new(m.beta, m.p_weight, 1.0 - m.p_weight, profile)?)
}

pub fn unbounded_scan(a: UnboundedScanArgs) -> CliResult<()> {
    let ns = parse_counts("n", &a.n)?;
    let spans = parse_list("span", &a.span)?;
    let rows = match a.kernel_model {
        KernelModel::Brownian => unboundedness_statistic(&|s: f64, t: f64| s.min(t), &spans, &ns, a.p),
        KernelModel::Exponential => unboundedness_statistic(&|s: f64, t: f64| (-(s - t).abs()).exp(), &spans, &ns, a.p),
        KernelModel::Levy => {
            let fns = spectral(&levy_model(&a.levy)?)?;
            let u = move |s: f64, t: f64| u_at(&fns, t - s).unwrap_or(f64::NAN);
            unboundedness_statistic(&u, &spans, &ns, a.p)
        }
    };
    let mut out = String::from("span,n,psi_star,log_n_over_psi,sigma_star2_log_n,error\n");
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            num(r.delta),
            r.n,
            opt(r.psi_star),
            opt(r.log_n_over_psi),
            opt(r.sigma_star2_log_n),
            r.error.as_deref().map(|e| format!("\"{}\"", e.replace('"', "\"\""))).unwrap_or_default()
        )
        .unwrap();
    }
    emit(&a.out.out, &out)
}

#[derive(Serialize)]
struct GeneratedKernel {
    n: usize,
    rows: Vec<Vec<f64>>,
    spectral_radius: f64,
    inverse_residual: f64,
}

pub fn gen_kernel(a: GenKernelArgs) -> CliResult<()> {
    let chain = random_transient_chain(a.n, a.kill_min, a.seed)?;
    let k = green_kernel(&chain)?;
    let i_minus_p = DenseMatrix::identity(a.n).sub(chain.p());
    let residual = inverse_residual(&i_minus_p, &k);
    let text = match a.format {
        KernelFormat::Json => to_json(&GeneratedKernel {
            n: a.n,
            rows: k.rows(),
            spectral_radius: chain.radius(),
            inverse_residual: residual,
        })?,
        KernelFormat::Text => k.to_text(),
    };
    emit(&a.out.out, &text)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PointsFile {
    List(Vec<f64>),
    Object { points: Vec<f64> },
}

pub fn levy(a: LevyArgs) -> CliResult<()> {
    let q = &a.query;
    let fmt = a.format;
    if q.classify {
        return classify(ClassifyArgs { gamma: a.model.gamma, delta: a.model.delta, p_weight: a.model.p_weight, out: a.out });
    }
    let model = levy_model(&a.model)?;
    if let Some(lam) = q.psi {
        let out = if lam == 0.0 {
            json!({ "lambda": 0.0, "re": 0.0, "im": 0.0, "re_error": 0.0, "im_error": 0.0 })
        } else {
            let (re, im) = model.psi_over_lambda(lam.abs().ln())?;
            let s = lam.abs();
            let sign = if lam < 0.0 { -1.0 } else { 1.0 };
            json!({
                "lambda": lam, "re": re.value * s, "im": sign * im.value * s,
                "re_error": re.error * s, "im_error": im.error * s,
            })
        };
        return emit(&a.out.out, &value_out(&out, fmt)?);
    }
    if let Some(text) = &q.scan_integrals {
        let ns = parse_list("scan-integrals", text)?;
        let table = integral_criterion(&model.profile, model.is_symmetric(), &ns)?;
        let text = match fmt {
            Format::Json => to_json(&table)?,
            Format::Csv => rows_out(&table.rows, fmt)?,
        };
        return emit(&a.out.out, &text);
    }
    let fns = spectral(&model)?;
    let text = if let Some(z) = q.u {
        value_out(&u_beta(&fns, z)?, fmt)?
    } else if let Some(z) = q.sigma2 {
        let s = fns.sigma2(z)?;
        let u0 = fns.r_part(0.0)?;
        let r = fns.r_part(z)?;
        value_out(
            &json!({
                "z": z, "sigma2": s.value, "error": s.error,
                "differencing": 2.0 * (u0.value - r.value), "differencing_error": 2.0 * (u0.error + r.error),
            }),
            fmt,
        )?
    } else if let Some(path) = &q.kernel {
        let points = match serde_json::from_str::<PointsFile>(&read_text(path)?) {
            Ok(PointsFile::List(p)) | Ok(PointsFile::Object { points: p }) => p,
            Err(e) => return Err(CliError::Usage(format!("{}: {e}", path.display()))),
        };
        if points.len() < 2 || points.iter().any(|p| !p.is_finite()) {
            return Err(CliError::Usage("--kernel needs at least two finite points".into()));
        }
        let n = points.len();
        let mut max_error: f64 = 0.0;
        let mut k = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let d = points[j] - points[i];
                let u = u_beta(&fns, d.abs())?;
                k[(i, j)] = if d >= 0.0 { u.u_plus } else { u.u_minus };
                max_error = max_error.max(u.r_error + u.h_error);
            }
        }
        let report = validate_appendix_lemma(&k);
        let inverse_residual = invert(&k).map(|inv| inverse_residual(&k, &inv)).ok();
        to_json(&json!({
            "points": points, "kernel": k, "max_error": max_error,
            "inverse": report, "inverse_residual": inverse_residual,
        }))?
    } else if let Some(text) = &q.h_ratio {
        let r = check_h_ratio(&fns, &parse_list("h-ratio", text)?)?;
        match fmt {
            Format::Json => to_json(&r)?,
            Format::Csv => rows_out(&r.rows, fmt)?,
        }
    } else if let Some(text) = &q.domination {
        let r = check_domination(&fns, &parse_list("domination", text)?)?;
        match fmt {
            Format::Json => to_json(&r)?,
            Format::Csv => rows_out(&r.rows, fmt)?,
        }
    } else if let Some(text) = &q.asymmetry {
        rows_out(&asymmetry_asymptotics(&fns, &parse_list("asymmetry", text)?)?, fmt)?
    } else {
        return Err(CliError::Usage("levy needs one query flag".into()));
    };
    emit(&a.out.out, &text)
}

pub fn classify(a: ClassifyArgs) -> CliResult<()> {
    let q = 1.0 - a.p_weight;
    let c = classify_log_power(a.gamma, a.delta, a.p_weight, q)?;
    emit(
        &a.out.out,
        &to_json(&json!({ "gamma": a.gamma, "delta": a.delta, "p": a.p_weight, "q": q, "label": c.label() }))?,
    )
}

pub fn validate_kernel(a: ValidateKernelArgs) -> CliResult<()> {
    let k = read_matrix(&a.kernel)?;
    let report = validate_appendix_lemma(&k);
    let residual = invert(&k).map(|inv| inverse_residual(&k, &inv)).ok();
    emit(&a.out.out, &to_json(&json!({ "report": report, "inverse_residual": residual }))?)?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Usage(report.violation.unwrap_or_else(|| "kernel rejected".into())))
    }
}
