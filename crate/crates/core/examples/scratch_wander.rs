use wanderdisc::wander::{wander_search, verify_certificate, WanderConfig};
use wanderdisc::padic::rat;

fn main() {
    let t0 = std::time::Instant::now();
    let cfg = WanderConfig::basic(2, vec![], 2);
    match wander_search(&cfg) {
        Ok(cert) => {
            println!("=== certificate (p=2, Q=0, depth 2), {:?}", t0.elapsed());
            for c in &cert.checks {
                println!("  [{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.witness);
            }
            println!("seed: {}", cert.seed);
            for s in &cert.stages {
                println!("stage {}: dist 2^-{} prefix {}", s.i, s.dist_exponent, s.prefix_len);
            }
            let t1 = std::time::Instant::now();
            match verify_certificate(&cert, &rat(2, 1)) {
                Ok(rep) => {
                    println!("=== verify at 2x: valid = {} ({:?})", rep.valid, t1.elapsed());
                    for c in &rep.checks {
                        println!("  [{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.witness);
                    }
                }
                Err(e) => println!("verify error: {e}"),
            }
        }
        Err(e) => println!("search error: {e}"),
    }
}
