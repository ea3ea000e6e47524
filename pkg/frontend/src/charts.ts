// Chart and map rendering as pure SVG strings: no external tile or chart
// service, so desk-scale demos work fully offline. A tile-based map
// provider could replace renderTrackMap behind the same signature.

export interface WindowRow {
  start: string;
  avg: number;
  min: number;
  max: number;
  count: number;
}

const WIDTH = 560;
const HEIGHT = 180;
const PAD = 28;

function scale(values: number[], lo: number, hi: number, size: number, pad: number): (v: number) => number {
  const span = hi - lo || 1;
  return (v: number) => pad + ((v - lo) / span) * (size - 2 * pad);
}

export function renderWindowChart(windows: WindowRow[], unitLabel: string): string {
  if (windows.length === 0) return "";
  const times = windows.map((w) => Date.parse(w.start));
  const lows = Math.min(...windows.map((w) => w.min));
  const highs = Math.max(...windows.map((w) => w.max));
  const x = scale(times, Math.min(...times), Math.max(...times), WIDTH, PAD);
  const y = scale([], lows, highs, HEIGHT, PAD);
  const flip = (v: number) => HEIGHT - y(v);

  const avgPoints = windows.map((w, i) => `${x(times[i]).toFixed(1)},${flip(w.avg).toFixed(1)}`).join(" ");
  const band = windows
    .map((w, i) => `${x(times[i]).toFixed(1)},${flip(w.max).toFixed(1)}`)
    .concat(windows.slice().reverse().map((w) => {
      const i = windows.indexOf(w);
      return `${x(times[i]).toFixed(1)},${flip(w.min).toFixed(1)}`;
    }))
    .join(" ");

  return [
    `<svg class="chart" viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="window aggregates">`,
    `<polygon points="${band}" class="chart-band" />`,
    `<polyline points="${avgPoints}" class="chart-avg" fill="none" />`,
    `<text x="${PAD}" y="14" class="chart-label">${unitLabel} (min/avg/max per window)</text>`,
    `<text x="${PAD}" y="${HEIGHT - 6}" class="chart-label">${windows[0].start}</text>`,
    `</svg>`,
  ].join("");
}

export function renderTrackMap(track: [string, number, number][]): string {
  if (track.length === 0) return "";
  const lats = track.map(([, lat]) => lat);
  const lons = track.map(([, , lon]) => lon);
  const x = scale(lons, Math.min(...lons), Math.max(...lons), WIDTH, PAD);
  const y = scale(lats, Math.min(...lats), Math.max(...lats), HEIGHT, PAD);
  const points = track
    .map(([, lat, lon]) => `${x(lon).toFixed(1)},${(HEIGHT - y(lat)).toFixed(1)}`)
    .join(" ");
  const [firstX, firstY] = points.split(" ")[0].split(",");
  const last = points.split(" ").slice(-1)[0].split(",");
  return [
    `<svg class="map" viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="position track">`,
    `<polyline points="${points}" class="map-track" fill="none" />`,
    `<circle cx="${firstX}" cy="${firstY}" r="4" class="map-start" />`,
    `<circle cx="${last[0]}" cy="${last[1]}" r="4" class="map-end" />`,
    `</svg>`,
  ].join("");
}
