use std::fs::File;
use std::io::{self, Write};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use aniso_core::Error;
use serde_json::{json, Value};

use crate::commands::{dispatch, load_settings};
use crate::{Format, Options};

/// Exit code of a check suite that ran but did not pass.
const CHECK_FAILED: i32 = 1;

fn error_record(err: &Error) -> Value {
    let mut record = json!({
        "kind": err.kind(),
        "message": err.to_string(),
        "exit_code": err.exit_code(),
    });
    match err {
        Error::Config { key, .. } => record["key"] = json!(key),
        Error::Convergence { iterations, residual, .. } => {
            record["iterations"] = json!(iterations);
            record["residual"] = json!(residual);
        }
        _ => {}
    }
    record
}

fn write_to(path: Option<&std::path::Path>, text: &str) -> io::Result<()> {
    match path {
        Some(p) => File::create(p)?.write_all(text.as_bytes()),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

/// Runs the command and writes its artifacts; returns the exit code.
pub fn run(opts: &Options) -> i32 {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let result = load_settings(opts).and_then(|(map, settings)| {
        let config: Value = map.entries().map(|(k, v)| (k.to_string(), json!(v))).collect();
        dispatch(opts, &map, &settings).map(|outcome| (config, outcome))
    });
    let metadata = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": started,
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
    });

    let (config, outcome, error) = match result {
        Ok((config, mut outcome)) => {
            let error = outcome.error.take();
            (Some(config), Some(outcome), error)
        }
        Err(err) => (None, None, Some(err)),
    };
    let mut code = match (&error, &outcome) {
        (Some(e), _) => e.exit_code(),
        (None, Some(o)) if o.check_failed => CHECK_FAILED,
        _ => 0,
    };

    if let Some(o) = &outcome {
        for w in &o.warnings {
            eprintln!("warning: {w}");
        }
    }
    if let Some(e) = &error {
        eprintln!("error: {e}");
    }

    let text = match (opts.format, &outcome) {
        (Format::Csv, Some(o)) => {
            if let Some(e) = &error {
                eprintln!("{}", error_record(e));
            }
            o.csv.clone()
        }
        _ => {
            let status = if error.is_some() { "error" } else { "ok" };
            let mut envelope = json!({
                "command": opts.command.name(),
                "status": status,
                "config": config,
                "payload": outcome.as_ref().map(|o| &o.payload),
                "metadata": metadata,
            });
            if let Some(e) = &error {
                envelope["error"] = error_record(e);
            }
            let mut s = serde_json::to_string_pretty(&envelope).expect("reports serialize");
            s.push('\n');
            s
        }
    };
    if let Err(e) = write_to(opts.out.as_deref(), &text) {
        eprintln!("error: cannot write report: {e}");
        return Error::Io(e).exit_code();
    }
    if let (Some(path), Some(field)) = (&opts.field, outcome.as_ref().and_then(|o| o.field.as_ref())) {
        let written = File::create(path)
            .map_err(Error::from)
            .and_then(|mut f| field.write_csv(&mut f));
        if let Err(e) = written {
            eprintln!("error: cannot write field: {e}");
            code = code.max(e.exit_code());
        }
    }
    code
}
