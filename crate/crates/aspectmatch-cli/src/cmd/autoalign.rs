//! The autoalign subcommand: run the alignment loop and write its trace.

use aspectmatch::autoalign::{run_loop, HttpLoopClient, LoopClients, Termination};

use crate::io::write_json_atomic;
use crate::mock::MockScript;
use crate::{AutoalignArgs, CliError};

pub fn run(args: AutoalignArgs) -> Result<u8, CliError> {
    if args.max_iters < 1 {
        return Err(CliError::Schema("--max-iters must be at least 1".into()));
    }
    let clients = build_clients(&args)?;
    let trace = run_loop(&args.prompt, &clients, args.max_iters);

    let outcome = match &trace.termination {
        Termination::Aligned => {
            println!("aligned after {} iterations", trace.iteration_count);
            0
        }
        Termination::BudgetExhausted => {
            println!(
                "budget exhausted: mismatches remain after {} iterations",
                trace.iteration_count
            );
            4
        }
        Termination::ClientError { stage, message } => {
            eprintln!("client failure in {stage}: {message}");
            3
        }
    };
    if let Some(out) = &args.out {
        write_json_atomic(out, &trace)?;
    }
    Ok(outcome)
}

fn build_clients(args: &AutoalignArgs) -> Result<LoopClients, CliError> {
    if let Some(path) = &args.mock {
        return MockScript::load(path)?.loop_clients();
    }
    let endpoint = |name: &str, value: &Option<String>| -> Result<String, CliError> {
        value
            .clone()
            .ok_or_else(|| CliError::Schema(format!("--{name} is required without --mock")))
    };
    Ok(LoopClients {
        t2i: Box::new(HttpLoopClient::new(
            endpoint("t2i-endpoint", &args.t2i_endpoint)?,
            None,
        )),
        detector: Box::new(HttpLoopClient::new(
            endpoint("detector-endpoint", &args.detector_endpoint)?,
            None,
        )),
        prompt_gen: Box::new(HttpLoopClient::new(
            endpoint("prompt-endpoint", &args.prompt_endpoint)?,
            None,
        )),
        editor: Box::new(HttpLoopClient::new(
            endpoint("editor-endpoint", &args.editor_endpoint)?,
            None,
        )),
    })
}
