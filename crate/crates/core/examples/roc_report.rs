//! Scores to metrics: ROC curve, AUC (equal to the Mann-Whitney statistic),
//! TPR at low FPR, balanced accuracy and F1 at a fixed threshold.
//!
//! cargo run --example roc_report

use clmia::metrics::{balanced_accuracy, f1, roc, tpr_at_fpr};

fn main() -> clmia::Result<()> {
    let scores = [0.95, 0.9, 0.8, 0.8, 0.7, 0.55, 0.5, 0.4, 0.3, 0.1];
    let truth = [true, true, false, true, true, false, true, false, false, false];
    let curve = roc(&scores, &truth)?;
    print!("{}", curve.to_text());
    println!("AUC {:.4}", curve.auc);
    for fpr in [0.0, 0.2, 0.4] {
        println!("TPR @ FPR <= {fpr}: {:.2}", tpr_at_fpr(&curve, fpr));
    }

    let decisions: Vec<bool> = scores.iter().map(|s| *s >= 0.5).collect();
    println!(
        "at 0.5: balanced accuracy {:.3}, F1 {:.3}",
        balanced_accuracy(&decisions, &truth)?,
        f1(&decisions, &truth)?
    );
    // Calling everything a member on a balanced set: BA 0.5, F1 2/3.
    let all = [true; 10];
    println!("all-member: BA {}, F1 {:.4}", balanced_accuracy(&all, &truth)?, f1(&all, &truth)?);
    Ok(())
}
