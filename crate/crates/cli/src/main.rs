//! `rsf`: grow random survival forests and write diagnostic tables.

mod tables;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rsf_core::dataset::{cut_with_breaks, load_frame, missing_census, pbc, quantile_cuts};
use rsf_core::dependence::{
    partial_coplot, partial_dependence, partial_surface, variable_coplot_data, variable_dependence, SurfaceAxis,
};
use rsf_core::forest::{deserialize, serialize, serialize_gzip, FOREST_SCHEMA_VERSION};
use rsf_core::importance::{interactions, minimal_depth, vimp};
use rsf_core::inference::{error_curve, grouped_survival, predict_oob, predict_test};
use rsf_core::km::{kaplan_meier, nelson_aalen};
use rsf_core::table::{Format, Table};
use rsf_core::{grow, Error, Forest, Frame, GroupAssignment, GrowConfig, LoadOptions, VariableSpec};

fn version() -> &'static str {
    static V: OnceLock<String> = OnceLock::new();
    V.get_or_init(|| format!("{} (forest schema {})", env!("CARGO_PKG_VERSION"), FOREST_SCHEMA_VERSION))
}

#[derive(Parser)]
#[command(name = "rsf", version = version(), about = "Random survival forests for right-censored data")]
struct Cli {
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0, env = "RSF_THREADS")]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Delimited file, or `pbc:trial`, `pbc:test`, `pbc:full` for the bundled data.
    #[arg(long)]
    data: Option<String>,
    /// JSON list of variable specs; inferred from the data when absent.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value = "years")]
    time_col: String,
    #[arg(long, default_value = "status")]
    status_col: String,
    /// Token marking a missing cell.
    #[arg(long, default_value = "NA")]
    na: String,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

#[derive(Args, Clone)]
struct OutArgs {
    /// Directory for output tables.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct GroupArgs {
    /// Grouping variable. Categorical variables group by level; continuous
    /// ones by quantile (`--groups`) or explicit `--breaks`.
    #[arg(long)]
    group_var: Option<String>,
    #[arg(long, default_value_t = 4)]
    groups: usize,
    #[arg(long, value_delimiter = ',')]
    breaks: Option<Vec<f64>>,
}

#[derive(Args, Clone)]
struct ForestArg {
    /// Forest document written by `rsf fit`.
    #[arg(long)]
    forest: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write the bundled PBC data and schema.
    Data {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Missing-value counts per variable.
    Census {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Kaplan-Meier or Nelson-Aalen estimates, optionally by group.
    Km {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long, default_value_t = 0.95)]
        conf: f64,
        #[arg(long)]
        nelson_aalen: bool,
    },
    /// Grow a forest and save it.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 1000)]
        ntree: usize,
        #[arg(long)]
        mtry: Option<usize>,
        #[arg(long, default_value_t = 10)]
        nsplit: usize,
        #[arg(long, default_value_t = 3)]
        nodesize: usize,
        #[arg(long, default_value_t = 42, env = "RSF_SEED")]
        seed: u64,
        /// Grow without imputation; data with missing predictors is rejected.
        #[arg(long)]
        no_impute: bool,
        /// Where to write the forest; `.gz` suffix or `--gzip` compresses.
        #[arg(long, default_value = "forest.json")]
        forest: PathBuf,
        #[arg(long)]
        gzip: bool,
    },
    /// Ensemble survival for new data, or out-of-bag for the training data.
    Predict {
        #[command(flatten)]
        forest: ForestArg,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        oob: bool,
        #[arg(long)]
        no_impute: bool,
        #[arg(long, default_value_t = 0.95)]
        conf: f64,
        #[arg(long)]
        bs_samples: Option<usize>,
        #[arg(long, default_value_t = 42, env = "RSF_SEED")]
        seed: u64,
    },
    /// Out-of-bag error as trees are added.
    Error {
        #[command(flatten)]
        forest: ForestArg,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Permutation importance.
    Vimp {
        #[command(flatten)]
        forest: ForestArg,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, default_value_t = 42, env = "RSF_SEED")]
        seed: u64,
    },
    /// Minimal depth with threshold and model size.
    Mindepth {
        #[command(flatten)]
        forest: ForestArg,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Add permutation importance next to depth.
        #[arg(long)]
        vimp: bool,
        #[arg(long, default_value_t = 42, env = "RSF_SEED")]
        seed: u64,
    },
    /// Pairwise minimal-depth interactions.
    Interact {
        #[command(flatten)]
        forest: ForestArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Out-of-bag survival against observed values.
    Vardep {
        #[command(flatten)]
        forest: ForestArg,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        xvar: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "1,3")]
        times: Vec<f64>,
    },
    /// Partial dependence.
    Pdp {
        #[command(flatten)]
        forest: ForestArg,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        xvar: String,
        #[arg(long, value_delimiter = ',', default_value = "1,3")]
        times: Vec<f64>,
        #[arg(long, default_value_t = 25)]
        npts: usize,
    },
    /// Variable or partial dependence conditioned on groups.
    Coplot {
        #[command(flatten)]
        forest: ForestArg,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        xvar: String,
        #[arg(long, default_value_t = 1.0)]
        time: f64,
        #[arg(long)]
        partial: bool,
        #[arg(long, default_value_t = 25)]
        npts: usize,
    },
    /// Partial dependence against time or a second variable.
    Surface {
        #[command(flatten)]
        forest: ForestArg,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        xvar: String,
        #[arg(long, default_value_t = 50)]
        npts: usize,
        /// `time` or the name of a second variable.
        #[arg(long, default_value = "time")]
        against: String,
        #[arg(long, default_value_t = 50)]
        n_axis2: usize,
        /// Evaluation time when `--against` names a variable.
        #[arg(long, default_value_t = 1.0)]
        time: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,3")]
        include_times: Vec<f64>,
        #[arg(long)]
        max_time: Option<f64>,
    },
}

type Res<T> = std::result::Result<T, Failure>;

/// Error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_usage() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("rsf: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rsf: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

impl DataArgs {
    fn options(&self, schema: Option<Vec<VariableSpec>>) -> Res<LoadOptions> {
        if !self.delimiter.is_ascii() {
            return Err(usage(format!("delimiter must be a single ASCII character, got '{}'", self.delimiter)));
        }
        let schema = match &self.schema {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read schema {}: {e}", path.display())))?;
                Some(serde_json::from_str(&text).map_err(|e| usage(format!("bad schema {}: {e}", path.display())))?)
            }
            None => schema,
        };
        Ok(LoadOptions {
            schema,
            na_token: self.na.clone(),
            delimiter: self.delimiter as u8,
            time_col: self.time_col.clone(),
            status_col: self.status_col.clone(),
            extend_levels: false,
        })
    }

    /// Load the frame; `fallback` names the bundled set used without `--data`.
    fn load(&self, fallback: &str, schema: Option<Vec<VariableSpec>>, extend_levels: bool) -> Res<Frame> {
        let source = self.data.as_deref().unwrap_or(fallback);
        match source {
            "pbc:trial" => return Ok(pbc::trial()),
            "pbc:test" => return Ok(pbc::test()),
            "pbc:full" => return Ok(pbc::full()),
            s if s.starts_with("pbc:") => return Err(usage(format!("unknown bundled data set '{s}'"))),
            _ => {}
        }
        if !Path::new(source).is_file() {
            return Err(usage(format!("data file '{source}' not found")));
        }
        let mut opts = self.options(schema)?;
        opts.extend_levels = extend_levels;
        Ok(load_frame(source, &opts)?)
    }
}

impl OutArgs {
    fn write(&self, name: &str, table: &Table) -> Res<()> {
        let format = match self.format {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        };
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(format!("{name}.{}", format.extension()));
        fs::write(&path, table.to_bytes(format)?)?;
        eprintln!("wrote {} ({} rows)", path.display(), table.len());
        Ok(())
    }
}

impl GroupArgs {
    fn assignment(&self, frame: &Frame) -> Res<Option<GroupAssignment>> {
        let Some(name) = &self.group_var else {
            if self.breaks.is_some() {
                return Err(usage("--breaks needs --group-var"));
            }
            return Ok(None);
        };
        let v = frame.require(name)?;
        let groups = if frame.variable(v).kind.is_categorical() {
            GroupAssignment::from_levels(frame, v)?
        } else if let Some(breaks) = &self.breaks {
            cut_with_breaks(name, frame.column(v), breaks)?
        } else {
            quantile_cuts(name, frame.column(v), self.groups)?
        };
        Ok(Some(groups))
    }
}

fn load_forest(path: &Path) -> Res<Forest> {
    let bytes = fs::read(path).map_err(|e| Failure {
        code: 1,
        message: format!("cannot read forest {}: {e}", path.display()),
    })?;
    Ok(deserialize(&bytes)?)
}

/// Training data for a saved forest, read with the forest's schema.
fn training(data: &DataArgs, forest: &Forest) -> Res<Frame> {
    data.load("pbc:trial", Some(forest.variables.clone()), false)
}

fn run(command: Command) -> Res<()> {
    match command {
        Command::Data { out } => {
            fs::create_dir_all(&out)?;
            let opts = pbc::options();
            for (name, frame) in [("pbc", pbc::full()), ("pbc_trial", pbc::trial()), ("pbc_test", pbc::test())] {
                let path = out.join(format!("{name}.csv"));
                frame.write_delimited(fs::File::create(&path)?, &opts)?;
                eprintln!("wrote {}", path.display());
            }
            let path = out.join("pbc.schema.json");
            fs::write(&path, pbc::SCHEMA)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Census { data, out } => {
            let frame = data.load("pbc:full", None, false)?;
            out.write("census", &tables::census(&missing_census(&frame)))?;
        }
        Command::Km { data, out, group, conf, nelson_aalen: na } => {
            let frame = data.load("pbc:trial", None, false)?;
            let by = group.assignment(&frame)?;
            let est = if na {
                nelson_aalen(&frame, by.as_ref())?
            } else {
                kaplan_meier(&frame, by.as_ref(), conf)?
            };
            warn(&est.warnings);
            out.write(if na { "nelson_aalen" } else { "kaplan_meier" }, &tables::curves(&est))?;
        }
        Command::Fit { data, ntree, mtry, nsplit, nodesize, seed, no_impute, forest, gzip } => {
            let frame = data.load("pbc:trial", None, false)?;
            let config = GrowConfig { ntree, mtry, nsplit, nodesize, seed, impute: !no_impute };
            let model = grow(&frame, &config)?;
            let compress = gzip || forest.extension().is_some_and(|e| e == "gz");
            let bytes = if compress { serialize_gzip(&model)? } else { serialize(&model)? };
            if let Some(dir) = forest.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&forest, bytes)?;
            let oob = predict_oob(&model, &frame)?;
            print_fit_summary(&model, oob.error().ok());
            eprintln!("wrote {}", forest.display());
        }
        Command::Predict { forest, data, out, group, oob, no_impute, conf, bs_samples, seed } => {
            let model = load_forest(&forest.forest)?;
            let ens = if oob {
                predict_oob(&model, &training(&data, &model)?)?
            } else {
                let frame = data.load("pbc:test", Some(model.variables.clone()), true)?;
                predict_test(&model, &frame, !no_impute)?
            };
            warn(&ens.warnings);
            if let Ok(e) = ens.error() {
                println!("error rate {e:.4}");
            }
            out.write("survival", &tables::survival(&ens))?;
            out.write("predictions", &tables::row_summary(&ens))?;
            if group.group_var.is_some() {
                // group membership comes from the same rows that were predicted
                let frame = if oob {
                    training(&data, &model)?
                } else {
                    data.load("pbc:test", Some(model.variables.clone()), true)?
                };
                let by = group.assignment(&frame)?.expect("group variable given");
                let g = grouped_survival(&ens, &by, conf, bs_samples, seed)?;
                warn(&g.warnings);
                out.write("grouped", &tables::grouped(&g))?;
            }
        }
        Command::Error { forest, data, out } => {
            let model = load_forest(&forest.forest)?;
            let frame = training(&data, &model)?;
            out.write("error", &tables::error_curve(&error_curve(&model, &frame)?))?;
        }
        Command::Vimp { forest, data, out, seed } => {
            let model = load_forest(&forest.forest)?;
            let frame = training(&data, &model)?;
            out.write("vimp", &tables::vimp(&vimp(&model, &frame, seed)?))?;
        }
        Command::Mindepth { forest, data, out, vimp: with_vimp, seed } => {
            let model = load_forest(&forest.forest)?;
            let depth = minimal_depth(&model);
            // prediction error and importance need the training rows
            let frame = if with_vimp || data.data.is_some() {
                Some(training(&data, &model)?)
            } else {
                None
            };
            let err = match &frame {
                Some(f) => predict_oob(&model, f)?.error().ok(),
                None => None,
            };
            let importance = match (&frame, with_vimp) {
                (Some(f), true) => Some(vimp(&model, f, seed)?),
                _ => None,
            };
            print_depth_summary(&depth, err);
            out.write("mindepth", &tables::depth(&depth, importance.as_ref()))?;
            out.write("mindepth_summary", &tables::depth_summary(&depth, err))?;
        }
        Command::Interact { forest, out } => {
            let model = load_forest(&forest.forest)?;
            out.write("interactions", &tables::interactions(&interactions(&model)))?;
        }
        Command::Vardep { forest, data, out, xvar, times } => {
            let model = load_forest(&forest.forest)?;
            let frame = training(&data, &model)?;
            let names: Vec<&str> = xvar.iter().map(String::as_str).collect();
            let grid = variable_dependence(&model, &frame, &names, &times)?;
            warn(&grid.warnings);
            out.write("vardep", &tables::dependence(&grid))?;
        }
        Command::Pdp { forest, data, out, xvar, times, npts } => {
            let model = load_forest(&forest.forest)?;
            let frame = training(&data, &model)?;
            let grid = partial_dependence(&model, &frame, &xvar, &times, npts)?;
            warn(&grid.warnings);
            out.write("pdp", &tables::dependence(&grid))?;
            if !grid.boxes.is_empty() {
                out.write("pdp_boxes", &tables::boxes(&grid))?;
            }
        }
        Command::Coplot { forest, data, out, group, xvar, time, partial, npts } => {
            let model = load_forest(&forest.forest)?;
            let frame = training(&data, &model)?;
            let by = group.assignment(&frame)?.ok_or_else(|| usage("coplot needs --group-var"))?;
            let grid = if partial {
                partial_coplot(&model, &frame, &xvar, &by, time, npts)?
            } else {
                variable_coplot_data(&model, &frame, &xvar, &by, &[time])?
            };
            warn(&grid.warnings);
            out.write("coplot", &tables::dependence(&grid))?;
            if !grid.boxes.is_empty() {
                out.write("coplot_boxes", &tables::boxes(&grid))?;
            }
        }
        Command::Surface { forest, data, out, xvar, npts, against, n_axis2, time, include_times, max_time } => {
            let model = load_forest(&forest.forest)?;
            let frame = training(&data, &model)?;
            let axis = if against == "time" {
                SurfaceAxis::Time { count: n_axis2, max_time, include: include_times }
            } else {
                SurfaceAxis::Variable { name: against, count: n_axis2, time }
            };
            let grid = partial_surface(&model, &frame, &xvar, npts, &axis)?;
            warn(&grid.warnings);
            out.write("surface", &tables::dependence(&grid))?;
        }
    }
    Ok(())
}

fn print_fit_summary(forest: &Forest, error: Option<f64>) {
    let terminals: usize = forest.trees.iter().map(|t| t.terminals().count()).sum();
    let lines = [
        ("Sample size", forest.n().to_string()),
        ("Number of deaths", forest.response.events().to_string()),
        ("Number of trees", forest.ntree().to_string()),
        ("Minimum terminal node size", forest.config.nodesize.to_string()),
        (
            "Average no. of terminal nodes",
            format!("{:.3}", terminals as f64 / forest.ntree().max(1) as f64),
        ),
        ("No. of variables tried at each split", forest.mtry().to_string()),
        ("Total no. of variables", forest.p().to_string()),
        ("Family", "surv".to_string()),
        ("Splitting rule", "logrank *random*".to_string()),
        ("Number of random split points", forest.config.nsplit.to_string()),
        ("Error rate", error.map_or("NA".to_string(), |e| format!("{:.2}%", 100.0 * e))),
    ];
    print_block(&lines);
}

fn print_depth_summary(depth: &rsf_core::importance::DepthTable, error: Option<f64>) {
    let mut lines = vec![
        ("Minimal depth threshold", format!("{:.4}", depth.threshold)),
        ("Model size", depth.model_size.to_string()),
        ("Number of trees", depth.ntree.to_string()),
        ("No. of variables tried at each split", depth.mtry.to_string()),
        ("Number of random split points", depth.nsplit.to_string()),
        ("Minimum terminal node size", depth.nodesize.to_string()),
    ];
    if let Some(e) = error {
        lines.push(("Prediction error", format!("{e:.4}")));
    }
    print_block(&lines);
    let selected: Vec<&str> = depth.ranked().iter().filter(|e| e.selected).map(|e| e.variable.as_str()).collect();
    println!("Selected: {}", selected.join(", "));
}

fn print_block(lines: &[(&str, String)]) {
    let width = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut stdout = std::io::stdout().lock();
    for (k, v) in lines {
        let _ = writeln!(stdout, "{k:>width$}: {v}");
    }
}
