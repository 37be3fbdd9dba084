//! Prints the base learning rate of each schedule at a few steps.

use sage::schedule::ScheduleSpec;

fn main() -> sage::Result<()> {
    let schedules = [
        ("constant", ScheduleSpec::constant(1e-3)),
        (
            "linear_warmup_decay",
            ScheduleSpec::linear_warmup_decay(1e-3, 100, 1000),
        ),
        ("inverse_sqrt", ScheduleSpec::inverse_sqrt(1e-3, 100)),
    ];
    let steps = [1, 10, 50, 100, 101, 250, 500, 999, 1000];
    print!("{:>20}", "step");
    for t in steps {
        print!("{t:>10}");
    }
    println!();
    for (name, s) in &schedules {
        s.validate()?;
        print!("{name:>20}");
        for t in steps {
            print!("{:>10.2e}", s.base_lr(t)?);
        }
        println!();
    }
    Ok(())
}
