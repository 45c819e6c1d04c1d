use imdtm::cli::{parse_config, run_to_path};
use imdtm::stencil::{build_weights, NeighborhoodGeometry};

const USAGE: &str = "\
usage:
  imdtm run [--config <path>] [--<key> <value> ...]
      Run an experiment and write CSV diagnostics to output_path (`-` = stdout).
      Flags mirror config keys: --equation, --scheme, --N, --L, --dt, --steps,
      --H_stored, --radius, --stacking, --max_order, --rk4_accuracy, --a_param,
      --output_path, --record_every. Flags override file values.
  imdtm stencil dump --radius <R> --source-orders <a-b|a,b,..> --target-orders <a-b|a,b,..> [--dx <d>]
      Print a reconstruction weight table as CSV.
";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("stencil") if args.get(1).map(String::as_str) == Some("dump") => {
            cmd_stencil_dump(&args[2..])
        }
        _ => {
            eprint!("{USAGE}");
            1
        }
    };
    std::process::exit(code);
}

fn take_flag_pairs(args: &[String]) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let key = flag
            .strip_prefix("--")
            .ok_or_else(|| format!("expected a --flag, got `{flag}`"))?;
        let value = it
            .next()
            .ok_or_else(|| format!("flag --{key} needs a value"))?;
        pairs.push((key.to_string(), value.clone()));
    }
    Ok(pairs)
}

fn cmd_run(args: &[String]) -> i32 {
    let mut pairs = match take_flag_pairs(args) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("{msg}");
            return 1;
        }
    };
    let mut text = String::new();
    if let Some(pos) = pairs.iter().position(|(k, _)| k == "config") {
        let (_, path) = pairs.remove(pos);
        text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read config `{path}`: {e}");
                return 1;
            }
        };
    }
    match parse_config(&text, &pairs) {
        Ok(cfg) => run_to_path(&cfg),
        Err(e) => {
            eprintln!("config error: {e}");
            1
        }
    }
}

fn parse_orders(spec: &str) -> Result<Vec<usize>, String> {
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once('-') {
        let lo: usize = lo.trim().parse().map_err(|_| format!("bad order `{lo}`"))?;
        let hi: usize = hi.trim().parse().map_err(|_| format!("bad order `{hi}`"))?;
        if hi < lo {
            return Err(format!("empty range `{spec}`"));
        }
        Ok((lo..=hi).collect())
    } else {
        spec.split(',')
            .map(|s| s.trim().parse().map_err(|_| format!("bad order `{s}`")))
            .collect()
    }
}

fn cmd_stencil_dump(args: &[String]) -> i32 {
    let pairs = match take_flag_pairs(args) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("{msg}");
            return 1;
        }
    };
    let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let radius: usize = match get("radius").map(str::parse) {
        Some(Ok(r)) => r,
        _ => {
            eprintln!("stencil dump needs --radius <R>");
            return 1;
        }
    };
    let dx: f64 = match get("dx").map(str::parse) {
        None => 1.0,
        Some(Ok(d)) => d,
        Some(Err(_)) => {
            eprintln!("bad --dx value");
            return 1;
        }
    };
    let sources = match get("source-orders").ok_or("missing --source-orders".to_string()).and_then(parse_orders) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("{msg}");
            return 1;
        }
    };
    let targets = match get("target-orders").ok_or("missing --target-orders".to_string()).and_then(parse_orders) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("{msg}");
            return 1;
        }
    };
    // sources must form a contiguous band
    let band = match (sources.first(), sources.last()) {
        (Some(&lo), Some(&hi)) if sources.iter().enumerate().all(|(i, &s)| s == lo + i) => {
            lo..hi + 1
        }
        _ => {
            eprintln!("source orders must be a contiguous ascending band");
            return 1;
        }
    };
    let geom = match NeighborhoodGeometry::uniform(radius, dx) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    match build_weights(&geom, band.clone(), &targets) {
        Ok(ws) => {
            println!("target_order,neighbor_offset,source_order,weight");
            for &t in ws.target_orders() {
                for (j, &off) in ws.geometry().offsets().iter().enumerate() {
                    for s in band.clone() {
                        println!("{t},{off},{s},{}", ws.weight(t, j, s));
                    }
                }
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            1
        }
    }
}
