use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use superchars::dataset::{
    corpus_stats, corpus_warnings, make_folds, make_folds_stratified, parse_corpus, FoldPlan, Record,
    StatsReport, Task,
};
use superchars::eval::{confusion, RunTable};
use superchars::exec::init_pool;
use superchars::export::{encode_gray_png, export_png, write_manifest, ManifestEntry, TensorWriter};
use superchars::glyph::{render_word, FontTable, BACKGROUND, INK};
use superchars::layout::render_scheme;
use superchars::matrix::{
    describe_run, predict_records, read_predictions, run_matrix, write_predictions, write_run, MatrixConfig,
    Prediction,
};
use superchars::model::{
    load_fixed, load_model, quantize, save_fixed, CnnArch, InputScale, TrainConfig, FIXED_MAGIC,
};
use superchars::{Error, Exec, Result, Scheme};

use crate::{Cli, Command, RenderArgs, TrainArgs};

pub fn run(cli: Cli) -> Result<()> {
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
    }
    init_pool(jobs);
    let exec = Exec::for_jobs(jobs);
    eprintln!("config: seed={} jobs={jobs} command={:?}", cli.seed, cli.command);
    match cli.command {
        Command::Stats { csv, out } => stats(&csv, out.as_deref()),
        Command::Render(args) => render(&args, exec),
        Command::Augment {
            csv,
            out,
            task,
            no_original,
        } => render(
            &RenderArgs {
                csv,
                design: Scheme::Four,
                out,
                task,
                no_original,
            },
            exec,
        ),
        Command::Folds { csv, k, stratify, out } => {
            let records = load_corpus(&csv)?;
            let plan = match stratify {
                Some(task) => {
                    require_labels(&records)?;
                    make_folds_stratified(&records, task, k, cli.seed)?
                }
                None => make_folds(&records, k, cli.seed)?,
            };
            plan.write(&out)?;
            println!("fold sizes {:?} -> {}", plan.sizes(), out.display());
            Ok(())
        }
        Command::Train(args) => train(&args, cli.seed, exec),
        Command::Predict {
            csv,
            models,
            design,
            task,
            fold,
            out,
        } => predict(&csv, &models, design, task, fold, &out, exec),
        Command::Eval { csv, runs, out } => eval(&csv, &runs, out.as_deref()),
        Command::Quantize {
            model,
            bits,
            activation_bits,
            out,
        } => {
            let m = load_model(&model)?;
            let q = quantize(&m, bits)?.with_activation_bits(activation_bits);
            for (i, l) in q.layers.iter().enumerate().filter(|(_, l)| !l.weights.values.is_empty()) {
                println!(
                    "layer {i}: weight scale 2^{} bias scale 2^{}",
                    l.weights.exponent, l.bias.exponent
                );
            }
            save_fixed(&q, &out)?;
            println!("{bits}-bit model -> {}", out.display());
            Ok(())
        }
        Command::Glyph { word, side, out } => {
            let cell = render_word(&word, side, &FontTable::builtin())?;
            let png = encode_gray_png(side, side, &cell.pixels)?;
            fs::write(&out, png).map_err(|e| Error::io(&out, e))?;
            println!("{} ink pixels -> {}", cell.ink_count(), out.display());
            Ok(())
        }
    }
}

/// Parses a corpus, with task labels when the header has them.
fn load_corpus(path: &Path) -> Result<Vec<Record>> {
    let records = match parse_corpus(path, true) {
        Err(Error::MissingColumn(_)) => parse_corpus(path, false)?,
        other => other?,
    };
    for w in corpus_warnings(&records) {
        eprintln!("warning: {w}");
    }
    Ok(records)
}

fn require_labels(records: &[Record]) -> Result<()> {
    match records.iter().position(|r| r.task_labels.is_none()) {
        Some(i) => Err(Error::Row {
            row: i + 1,
            message: "corpus has no task labels".into(),
        }),
        None => Ok(()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn stats(csv: &Path, out: Option<&Path>) -> Result<()> {
    let records = load_corpus(csv)?;
    let report = corpus_stats(&records)?;
    print!("{}", report.to_text());
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("stats.txt"), report.to_key_values())?;
        write_file(&dir.join("histogram.txt"), report.to_text())?;
        write_file(&dir.join("histogram.png"), histogram_png(&report)?)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

/// Bar chart of the length histogram, one 2px bar per word count.
fn histogram_png(report: &StatsReport) -> Result<Vec<u8>> {
    const HEIGHT: usize = 200;
    let max_len = report.length_histogram.keys().max().copied().unwrap_or(0);
    let peak = report.length_histogram.values().max().copied().unwrap_or(1).max(1);
    let width = 2 * (max_len + 1);
    let mut px = vec![BACKGROUND; width * HEIGHT];
    for (&len, &count) in &report.length_histogram {
        let bar = (count * HEIGHT).div_ceil(peak);
        for y in HEIGHT - bar..HEIGHT {
            px[y * width + 2 * len] = INK;
        }
    }
    encode_gray_png(width, HEIGHT, &px)
}

/// Records rendered per batch; bounds memory for augmented corpora.
const RENDER_CHUNK: usize = 256;

fn render(args: &RenderArgs, exec: Exec) -> Result<()> {
    let records = load_corpus(&args.csv)?;
    if args.task.is_some() {
        require_labels(&records)?;
    }
    let png_dir = args.out.join("png");
    create_dir(&png_dir)?;
    let mut tensor = TensorWriter::create(&args.out.join("images.schr"))?;
    let task_name = args.task.map(|t| t.to_string());
    let mut manifest = Vec::new();
    for chunk in records.chunks(RENDER_CHUNK) {
        let per_record = exec.map(chunk, |r| {
            render_scheme(std::slice::from_ref(r), args.design, !args.no_original, Exec::Sequential)
        });
        let images: Vec<(&Record, &superchars::SuperImage)> = chunk
            .iter()
            .zip(&per_record)
            .flat_map(|(r, imgs)| imgs.iter().map(move |img| (r, img)))
            .collect();
        let base = manifest.len();
        exec.try_map(&(0..images.len()).collect::<Vec<_>>(), |&i| {
            export_png(images[i].1, &png_dir.join(format!("{:06}.png", base + i)))
        })?;
        for (r, img) in images {
            let label = args.task.and_then(|t| r.task_label(t)).map(u32::from);
            tensor.push(img, label)?;
            manifest.push(ManifestEntry::new(manifest.len(), img, task_name.as_deref(), label));
        }
    }
    let count = tensor.finish()?;
    write_manifest(&args.out.join("manifest.csv"), &manifest)?;
    println!(
        "{} records -> {count} images under design {} in {}",
        records.len(),
        args.design,
        args.out.display()
    );
    Ok(())
}

fn train(args: &TrainArgs, seed: u64, exec: Exec) -> Result<()> {
    let records = load_corpus(&args.csv)?;
    let plan = match &args.folds_file {
        Some(path) => FoldPlan::read(path, args.k)?,
        None => make_folds(&records, args.k, seed)?,
    };
    let mut train_cfg = TrainConfig::with_epochs(args.epochs);
    train_cfg.learning_rate = args.lr;
    train_cfg.batch_size = args.batch_size;
    train_cfg.seed = seed;
    train_cfg.exec = exec;
    let cfg = MatrixConfig {
        scheme: args.design,
        tasks: args.tasks.clone().unwrap_or_else(|| Task::ALL.to_vec()),
        folds: args.only_folds.clone(),
        input: if args.desk_scale { InputScale::Desk } else { InputScale::Full },
        arch: args.arch,
        train: train_cfg,
        include_original: !args.no_original,
        // pairs run one after another; parallelism lives inside each batch
        exec: Exec::Sequential,
    };
    let folds: Vec<usize> = cfg.folds.clone().unwrap_or_else(|| (0..plan.k).collect());
    create_dir(&args.out)?;
    let mut description = describe_run(&cfg, plan.k);
    description.push_str(&format!(
        "folds={}\n",
        folds.iter().map(usize::to_string).collect::<Vec<_>>().join("|")
    ));
    write_file(&args.out.join("run.txt"), &description)?;
    plan.write(&args.out.join("folds.csv"))?;

    let runs = run_matrix(&records, &plan, &cfg)?;
    for run in &runs {
        write_run(&args.out, &records, cfg.scheme, run)?;
        let preds: Vec<u8> = run.predictions.iter().map(|p| p.pred).collect();
        let labels: Vec<u8> = run
            .validation_records
            .iter()
            .map(|&i| records[i].task_label(run.task).unwrap_or(0))
            .collect();
        let m = confusion(&preds, &labels)?;
        println!(
            "{} fold{}: {} training images, final loss {:.4}, validation accuracy {:.2}%",
            run.task,
            run.fold,
            run.training_items.len(),
            run.loss_trace.last().copied().unwrap_or(f64::NAN),
            m.accuracy() * 100.0
        );
    }
    println!("{} models -> {}", runs.len(), args.out.display());
    Ok(())
}

/// Splits a `<task>_fold<f>` file stem.
fn task_and_fold(path: &Path) -> Option<(Task, usize)> {
    let stem = path.file_stem()?.to_str()?;
    let (task, fold) = stem.rsplit_once("_fold")?;
    Some((task.parse().ok()?, fold.parse().ok()?))
}

fn input_scale(arch: &CnnArch) -> Result<InputScale> {
    [InputScale::Full, InputScale::Desk]
        .into_iter()
        .find(|s| s.shape() == arch.input)
        .ok_or_else(|| Error::InvalidArgument(format!("model input {:?} is not an image shape", arch.input)))
}

fn is_fixed_point(path: &Path) -> Result<bool> {
    let mut magic = [0u8; 5];
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(f.read_exact(&mut magic).is_ok() && &magic == FIXED_MAGIC)
}

fn predict(
    csv: &Path,
    models: &[PathBuf],
    design: Scheme,
    task: Option<Task>,
    fold: Option<usize>,
    out: &Path,
    exec: Exec,
) -> Result<()> {
    let records = load_corpus(csv)?;
    let mut all = Vec::new();
    for path in models {
        let inferred = task_and_fold(path);
        let (Some(task), Some(fold)) = (task.or(inferred.map(|p| p.0)), fold.or(inferred.map(|p| p.1))) else {
            return Err(Error::InvalidArgument(format!(
                "cannot tell the task and fold of {}; pass --task and --fold",
                path.display()
            )));
        };
        let scored: Vec<(f64, u8)> = if is_fixed_point(path)? {
            let q = load_fixed(path)?;
            let scale = input_scale(&q.arch)?;
            let deq = q.dequantize();
            let spec = design.layout();
            exec.map(&records, |r| {
                let p = q.forward_with(&deq, &scale.to_input(&superchars::layout::render(r, &spec, 0).pixels));
                (p[1], u8::from(p[1] > p[0]))
            })
        } else {
            let m = load_model(path)?;
            predict_records(&m, &records, design, input_scale(&m.arch)?, exec)
        };
        all.extend(records.iter().zip(scored).map(|(r, (prob_1, pred))| Prediction {
            record_id: r.sentenceid.clone(),
            task,
            fold,
            prob_1,
            pred,
        }));
    }
    write_predictions(out, &all)?;
    println!("{} predictions -> {}", all.len(), out.display());
    Ok(())
}

fn read_run_description(dir: &Path) -> Result<BTreeMap<String, String>> {
    let path = dir.join("run.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

fn eval(csv: &Path, runs: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let records = load_corpus(csv)?;
    require_labels(&records)?;
    let mut by_id: HashMap<&str, &Record> = HashMap::new();
    for r in &records {
        if by_id.insert(&r.sentenceid, r).is_some() {
            eprintln!("warning: duplicate sentenceid {}; labels of the last one are used", r.sentenceid);
        }
    }
    let mut table = RunTable::default();
    for dir in runs {
        let desc = read_run_description(dir)?;
        let field = |k: &str| {
            desc.get(k)
                .cloned()
                .ok_or_else(|| Error::format(dir.join("run.txt"), format!("missing `{k}`")))
        };
        let scheme: Scheme = field("design")?.parse()?;
        let tasks = field("tasks")?
            .split('|')
            .map(str::parse)
            .collect::<Result<Vec<Task>>>()?;
        let folds = field("folds")?
            .split('|')
            .map(|f| f.parse().map_err(|_| Error::format(dir.join("run.txt"), "bad fold list")))
            .collect::<Result<Vec<usize>>>()?;
        for &task in &tasks {
            for &fold in &folds {
                let path = dir.join("predictions").join(format!("{task}_fold{fold}.csv"));
                if !path.exists() {
                    continue;
                }
                let preds = read_predictions(&path)?;
                let mut p = Vec::with_capacity(preds.len());
                let mut l = Vec::with_capacity(preds.len());
                for pred in &preds {
                    let rec = by_id.get(pred.record_id.as_str()).ok_or_else(|| {
                        Error::format(&path, format!("record {} is not in the corpus", pred.record_id))
                    })?;
                    p.push(pred.pred);
                    l.push(rec.task_label(task).expect("labels checked"));
                }
                let metrics = if p.is_empty() { None } else { Some(confusion(&p, &l)?) };
                table.insert(task, scheme, fold, metrics);
            }
        }
        table.expect_runs(&tasks, &[scheme], &folds);
    }
    let text = table.render_text();
    print!("{text}");
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("report.txt"), &text)?;
        write_file(&dir.join("report.csv"), table.render_csv())?;
    }
    Ok(())
}
