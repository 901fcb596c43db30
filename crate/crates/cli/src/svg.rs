use rodlab::injectify::ArrivalGrid;
use rodlab::Vec2;

/// Deterministic SVG scene in curve coordinates (y up).
pub struct Scene {
    lo: Vec2,
    hi: Vec2,
    body: Vec<String>,
    metadata: Option<String>,
}

fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn points(pts: &[Vec2]) -> String {
    pts.iter().map(|p| format!("{},{}", num(p.x), num(-p.y))).collect::<Vec<_>>().join(" ")
}

impl Scene {
    /// Bounding box of all geometry; fails on empty input.
    pub fn new(geometry: &[&[Vec2]]) -> Option<Self> {
        let mut it = geometry.iter().flat_map(|g| g.iter());
        let first = *it.next()?;
        let (mut lo, mut hi) = (first, first);
        for p in it {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        Some(Self { lo, hi, body: Vec::new(), metadata: None })
    }

    fn size(&self) -> f64 {
        (self.hi - self.lo).max().max(1e-9)
    }

    fn stroke(&self) -> f64 {
        self.size() * 0.004
    }

    pub fn metadata(&mut self, json: String) {
        self.metadata = Some(json);
    }

    pub fn polyline(&mut self, pts: &[Vec2], color: &str, width: f64) {
        self.body.push(format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" stroke-linejoin=\"round\"/>",
            points(pts),
            color,
            num(self.stroke() * width)
        ));
    }

    pub fn polygon(&mut self, pts: &[Vec2], fill: &str, stroke: &str) {
        self.body.push(format!(
            "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.35\" stroke=\"{}\" stroke-width=\"{}\"/>",
            points(pts),
            fill,
            stroke,
            num(self.stroke())
        ));
    }

    pub fn circle(&mut self, c: Vec2, r: f64, color: &str) {
        self.body.push(format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>",
            num(c.x),
            num(-c.y),
            num(r),
            color,
            num(self.stroke() * 0.6)
        ));
    }

    pub fn grid(&mut self, g: &ArrivalGrid) {
        let (x0, x1) = (self.lo.x.max(g.xs[0]), self.hi.x.min(*g.xs.last().unwrap()));
        let (y0, y1) = (self.lo.y.max(g.ys[0]), self.hi.y.min(*g.ys.last().unwrap()));
        let w = num(self.stroke() * 0.4);
        for &x in g.xs.iter().filter(|&&x| x >= x0 && x <= x1) {
            self.body.push(format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#bbbbbb\" stroke-width=\"{3}\"/>",
                num(x),
                num(-y0),
                num(-y1),
                w
            ));
        }
        for &y in g.ys.iter().filter(|&&y| y >= y0 && y <= y1) {
            self.body.push(format!(
                "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"#bbbbbb\" stroke-width=\"{3}\"/>",
                num(-y),
                num(x0),
                num(x1),
                w
            ));
        }
    }

    pub fn render(&self) -> String {
        let m = 0.05 * self.size();
        let (x, y) = (self.lo.x - m, -self.hi.y - m);
        let (w, h) = (self.hi.x - self.lo.x + 2.0 * m, self.hi.y - self.lo.y + 2.0 * m);
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\" width=\"800\" height=\"{}\">\n",
            num(x),
            num(y),
            num(w),
            num(h),
            (800.0 * h / w).round() as i64
        );
        if let Some(md) = &self.metadata {
            s.push_str(&format!("<metadata>{}</metadata>\n", escape(md)));
        }
        for line in &self.body {
            s.push_str(line);
            s.push('\n');
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
