//! The three experiments behind `levlab run`.

use levlab_core::geometry::{
    berry_phase, make_loop, track_modes, two_level_family, EigenSource, ParametricLoop, RetrievalSetup,
};
use levlab_core::io::{
    berry_csv_string, berry_to_json, eigensystem_to_json, retrieved_mode_to_json, write_campaign, CampaignManifest,
};
use levlab_core::linalg::{alignment, eig};
use levlab_core::models::{build_ssh_obc, ep_locations, pbc_locus, tzm_profile};
use levlab_core::response::{run_campaign, CampaignMode, NoiseSpec};
use levlab_core::retrieval::{retrieve_eigensystem, retrieve_eigvec_with, ModeSelector, RetrieveOptions};
use levlab_core::{BerryResult64, Campaign64, Complex64, Hamiltonian64, RetrievedMode64};
use log::info;

use crate::bundle::{ArtifactWriter, ResultBundle};
use crate::config::{Eigenvectors, Format, Model, RunConfig};
use crate::error::{CliError, Result};
use crate::plot::{render_svg, Labels, PlotKind, Series};

/// Runs the configured experiment and writes every artifact plus
/// `bundle.json` into the output directory.
pub fn run(cfg: &RunConfig) -> Result<ResultBundle> {
    let mut out = ArtifactWriter::new(&cfg.output.directory)?;
    match &cfg.model {
        Model::TwoLevel(_) => two_level_berry(cfg, &mut out)?,
        Model::Ssh(_) => ssh_tzm(cfg, &mut out)?,
        Model::Custom(_) => custom(cfg, &mut out)?,
    }
    out.finish(cfg.clone())
}

fn noise(cfg: &RunConfig) -> Option<NoiseSpec> {
    (cfg.campaign.noise_sigma_rel > 0.0).then_some(NoiseSpec {
        sigma_rel: cfg.campaign.noise_sigma_rel,
        seed: cfg.campaign.seed,
    })
}

fn campaigns(cfg: &RunConfig, h: &Hamiltonian64) -> Result<(Campaign64, Campaign64)> {
    let grid = cfg.grid.values();
    let c = &cfg.campaign;
    info!(
        "synthesizing LEV (probe {}) and REV (source {}) campaigns on {} points",
        c.lev_fixed_site, c.rev_fixed_site, cfg.grid.points
    );
    let lev = run_campaign(h, &grid, CampaignMode::Lev, c.lev_fixed_site, cfg.a0(), noise(cfg))?;
    let rev = run_campaign(h, &grid, CampaignMode::Rev, c.rev_fixed_site, cfg.a0(), noise(cfg))?;
    Ok((lev, rev))
}

fn save_campaign(out: &mut ArtifactWriter, c: &Campaign64, stem: &str) -> Result<()> {
    let dir = out.root().join("campaigns");
    let manifest = write_campaign(c, &dir, stem)?;
    let text = std::fs::read_to_string(&manifest).map_err(|e| CliError::io(&manifest, e))?;
    let m: CampaignManifest = serde_json::from_str(&text).map_err(|e| CliError::config(e.to_string()))?;
    for f in &m.files {
        out.record(&format!("campaigns/{f}"))?;
    }
    out.record(&format!("campaigns/{stem}.json"))
}

fn campaign_plot(c: &Campaign64, title: &str) -> Result<String> {
    let series: Vec<Series> = c
        .spectra
        .iter()
        .map(|s| {
            Series::new(
                format!("s{} p{}", s.source_idx, s.probe_idx),
                s.omega_grid.clone(),
                s.amplitudes.iter().map(|a| a.norm()).collect(),
            )
        })
        .collect();
    let labels = Labels {
        title: title.into(),
        x: "omega (rad/s)".into(),
        y: "|A|".into(),
    };
    render_svg(&series, PlotKind::Line, &labels)
}

fn emit_campaigns(cfg: &RunConfig, out: &mut ArtifactWriter, lev: &Campaign64, rev: &Campaign64) -> Result<()> {
    if cfg.output.wants(Format::Csv) {
        save_campaign(out, lev, "lev")?;
        save_campaign(out, rev, "rev")?;
    }
    if cfg.output.wants(Format::Svg) {
        out.write("campaign_lev.svg", campaign_plot(lev, "LEV campaign")?)?;
        out.write("campaign_rev.svg", campaign_plot(rev, "REV campaign")?)?;
    }
    Ok(())
}

fn options(cfg: &RunConfig) -> RetrieveOptions<f64> {
    RetrieveOptions {
        method: cfg.campaign.method,
        ..RetrieveOptions::default()
    }
}

fn two_level_berry(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<()> {
    let Model::TwoLevel(m) = &cfg.model else {
        unreachable!("dispatched on the model kind")
    };
    let l = cfg
        .loop_
        .as_ref()
        .ok_or_else(|| CliError::config("loop block missing"))?;
    let params = m.params();
    let lp = make_loop(
        (l.center_rad_s[0], l.center_rad_s[1]),
        (l.radii_rad_s[0], l.radii_rad_s[1]),
        l.steps,
        l.cycles,
        l.orientation,
    )?;
    let source = match l.eigenvectors {
        Eigenvectors::Exact => EigenSource::Exact,
        Eigenvectors::Retrieved => EigenSource::Retrieved(RetrievalSetup {
            grid: cfg.grid.values(),
            lev_fixed: cfg.campaign.lev_fixed_site,
            rev_fixed: cfg.campaign.rev_fixed_site,
            a0: cfg.a0(),
            noise: noise(cfg),
        }),
    };
    info!(
        "tracking {} points ({} cycles) with {:?} eigenvectors",
        lp.points.len(),
        lp.cycles,
        l.eigenvectors
    );
    let family = two_level_family(params);
    let strands = track_modes(&family, &lp, &source)?;
    let results: Vec<BerryResult64> = strands.iter().map(berry_phase).collect::<levlab_core::Result<_>>()?;
    for (s, b) in strands.iter().zip(&results) {
        info!("band {}: theta = {:.6} rad", s.band, b.theta);
    }

    // campaigns at the first loop point, as a sample of the raw data
    let (px, py) = lp.points[0];
    let h0 = family(px, py)?;
    let (lev, rev) = campaigns(cfg, &h0)?;
    emit_campaigns(cfg, out, &lev, &rev)?;

    for (i, b) in results.iter().enumerate() {
        let stem = if i == 0 { "berry".to_string() } else { format!("berry_b{i}") };
        if cfg.output.wants(Format::Json) {
            out.write(&format!("{stem}.json"), berry_to_json(b))?;
        }
        if cfg.output.wants(Format::Csv) {
            out.write(&format!("{stem}.csv"), berry_csv_string(b))?;
        }
    }
    if cfg.output.wants(Format::Svg) {
        out.write("berry.svg", berry_plot(&results)?)?;
        out.write("loop.svg", loop_plot(&lp, m.gamma1_rad_s, m.gamma2_rad_s)?)?;
    }
    Ok(())
}

fn berry_plot(results: &[BerryResult64]) -> Result<String> {
    let mut series = Vec::new();
    for (i, b) in results.iter().enumerate() {
        let steps: Vec<f64> = (0..b.cumulative.len()).map(|k| k as f64).collect();
        series.push(Series::new(format!("cumulative, band {i}"), steps.clone(), b.cumulative.clone()));
        series.push(Series::new(
            format!("arg <e1|R>, band {i}"),
            steps.clone(),
            b.projections_rev.iter().map(|z| z.arg()).collect(),
        ));
        series.push(Series::new(
            format!("arg <L|e1>, band {i}"),
            steps,
            b.projections_lev.iter().map(|z| z.arg()).collect(),
        ));
    }
    let labels = Labels {
        title: "Parallel-transported phase".into(),
        x: "step".into(),
        y: "phase (rad)".into(),
    };
    render_svg(&series, PlotKind::Line, &labels)
}

fn loop_plot(lp: &ParametricLoop<f64>, g1: f64, g2: f64) -> Result<String> {
    let n = lp.steps_per_cycle;
    let (mut x, mut y): (Vec<f64>, Vec<f64>) = lp.points[..n].iter().copied().unzip();
    x.push(x[0]);
    y.push(y[0]);
    let mut series = vec![Series::new("loop", x, y)];
    if let Ok(eps) = ep_locations(g1, g2) {
        let (ex, ey) = eps.points.iter().copied().unzip();
        series.push(Series::new("EPs", ex, ey).with_markers());
    }
    let labels = Labels {
        title: "Parameter loop".into(),
        x: "phi_x (rad/s)".into(),
        y: "phi_y (rad/s)".into(),
    };
    render_svg(&series, PlotKind::ComplexPlane, &labels)
}

fn ssh_tzm(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<()> {
    let Model::Ssh(m) = &cfg.model else {
        unreachable!("dispatched on the model kind")
    };
    let p = m.params();
    let h = build_ssh_obc(&p)?;
    let (lev, rev) = campaigns(cfg, &h)?;
    emit_campaigns(cfg, out, &lev, &rev)?;

    let target = ModeSelector::Frequency(cfg.campaign.target_rad_s.unwrap_or(m.onsite_rad_s));
    let opts = options(cfg);
    let (l, _) = retrieve_eigvec_with(&lev, target, &opts)?;
    let (r, _) = retrieve_eigvec_with(&rev, target, &opts)?;
    let profile = tzm_profile(&p)?;
    let (ra, la) = (profile.rev_sites(), profile.lev_sites());
    info!(
        "alignment with the analytic zero mode: REV {:.8}, LEV {:.8}",
        alignment(&r.entries, &ra),
        alignment(&l.entries, &la)
    );

    if cfg.output.wants(Format::Json) {
        out.write("rev_tzm.json", retrieved_mode_to_json(&r))?;
        out.write("lev_tzm.json", retrieved_mode_to_json(&l))?;
    }
    let unit = |v: &[Complex64]| -> Vec<f64> {
        let top = v.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        v.iter().map(|z| if top > 0.0 { z.norm() / top } else { 0.0 }).collect()
    };
    let cols = [unit(&r.entries), unit(&l.entries), unit(&ra), unit(&la)];
    let locus = pbc_locus(&p, 512)?;
    let obc = eig(&h)?.eigenvalues;
    if cfg.output.wants(Format::Csv) {
        let mut text = String::from("site,rev_retrieved,lev_retrieved,rev_analytic,lev_analytic\n");
        for i in 0..h.dim() {
            text += &format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                i + 1,
                cols[0][i],
                cols[1][i],
                cols[2][i],
                cols[3][i]
            );
        }
        out.write("tzm_profile.csv", text)?;
        let mut text = String::from("re_upper,im_upper,re_lower,im_lower\n");
        for (a, b) in locus[0].iter().zip(&locus[1]) {
            text += &format!("{:.17e},{:.17e},{:.17e},{:.17e}\n", a.re, a.im, b.re, b.im);
        }
        out.write("pbc_locus.csv", text)?;
        let mut text = String::from("re_obc,im_obc\n");
        for z in &obc {
            text += &format!("{:.17e},{:.17e}\n", z.re, z.im);
        }
        out.write("obc_spectrum.csv", text)?;
    }
    if cfg.output.wants(Format::Svg) {
        let sites: Vec<f64> = (1..=h.dim()).map(|i| i as f64).collect();
        let names = ["REV retrieved", "LEV retrieved", "REV analytic", "LEV analytic"];
        let series: Vec<Series> = names
            .iter()
            .zip(&cols)
            .map(|(n, c)| Series::new(*n, sites.clone(), c.clone()))
            .collect();
        let labels = Labels {
            title: "Zero-mode profile".into(),
            x: "site".into(),
            y: "|entry| / max".into(),
        };
        out.write("tzm_profile.svg", render_svg(&series, PlotKind::Scatter, &labels)?)?;

        let close = |v: &[Complex64]| {
            let mut v = v.to_vec();
            v.push(v[0]);
            v
        };
        let curve = |name: &str, v: Vec<Complex64>| Series::new(name, v.iter().map(|z| z.re).collect(), v.iter().map(|z| z.im).collect());
        let series = vec![
            curve("PBC upper", close(&locus[0])),
            curve("PBC lower", close(&locus[1])),
            curve("OBC", obc.clone()).with_markers(),
        ];
        let labels = Labels {
            title: "Spectrum".into(),
            x: "Re omega (rad/s)".into(),
            y: "Im omega (rad/s)".into(),
        };
        out.write("spectrum.svg", render_svg(&series, PlotKind::ComplexPlane, &labels)?)?;
    }
    Ok(())
}

fn custom(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<()> {
    let Model::Custom(m) = &cfg.model else {
        unreachable!("dispatched on the model kind")
    };
    let h = m.hamiltonian()?;
    let (lev, rev) = campaigns(cfg, &h)?;
    emit_campaigns(cfg, out, &lev, &rev)?;
    let json = cfg.output.wants(Format::Json);

    if let Some(t) = cfg.campaign.target_rad_s {
        let opts = options(cfg);
        let (l, _) = retrieve_eigvec_with(&lev, ModeSelector::Frequency(t), &opts)?;
        let (r, _) = retrieve_eigvec_with(&rev, ModeSelector::Frequency(t), &opts)?;
        report_mode(&l);
        report_mode(&r);
        if json {
            out.write("lev_mode.json", retrieved_mode_to_json(&l))?;
            out.write("rev_mode.json", retrieved_mode_to_json(&r))?;
        }
        return Ok(());
    }
    let retrieved = retrieve_eigensystem(&lev, &rev, None)?;
    for (k, w) in retrieved.system.eigenvalues.iter().enumerate() {
        info!("mode {k}: omega = {:.6} {:+.6}i", w.re, w.im);
    }
    if json {
        out.write("eigensystem_retrieved.json", eigensystem_to_json(&retrieved.system))?;
        out.write("eigensystem_exact.json", eigensystem_to_json(&eig(&h)?))?;
    }
    Ok(())
}

fn report_mode(m: &RetrievedMode64) {
    info!(
        "{} mode {} at {:.6} rad/s via {:?}, quality {:.3e}",
        m.kind, m.mode_idx, m.omega_re, m.method, m.quality
    );
}
