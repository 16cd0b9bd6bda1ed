#![no_main]
use libfuzzer_sys::fuzz_target;
use sonic_cli::commands::{plan, Command};
use sonic_cli::config::parse_config;

const COMMANDS: [Command; 7] = [
    Command::PhasePortrait,
    Command::Profile,
    Command::KzCheck,
    Command::KeldyshSolve,
    Command::MixedSolve,
    Command::ShockPolar,
    Command::Geometry,
];

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = parse_config(text) else { return };
    // Planning only validates; nothing is solved here.
    for cmd in COMMANDS {
        let _ = plan(cmd, &cfg);
    }
});
