#include "birdplan/sparse_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace birdplan {
namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

bool is_comment_or_blank(const std::string& line) {
    for (char c : line) {
        if (c == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;  // blank
}

double parse_double(const std::string& tok, int line_no) {
    try {
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size() || !std::isfinite(v))
            throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad numeric field '" + tok + "'");
    }
}

long parse_int(const std::string& tok, int line_no) {
    long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad integer field '" + tok + "'");
    return v;
}

}  // namespace

void PinholeIntrinsics::validate() const {
    if (width <= 0 || height <= 0)
        throw ValidationError("camera " + std::to_string(camera_id) + ": non-positive dimensions");
    if (fx <= 0 || fy <= 0)
        throw ValidationError("camera " + std::to_string(camera_id) + ": non-positive focal length");
    if (!(cx > 0 && cx < width && cy > 0 && cy < height))
        throw ValidationError("camera " + std::to_string(camera_id) + ": principal point outside image");
}

const PinholeIntrinsics& Reconstruction::intrinsics_for(const View& v) const {
    auto it = intrinsics.find(v.camera_id);
    if (it == intrinsics.end())
        throw ConsistencyError("image " + std::to_string(v.image_id) + " references unknown camera " +
                               std::to_string(v.camera_id));
    return it->second;
}

void Reconstruction::validate() const {
    std::set<int> ids;
    std::set<std::string> names;
    for (const auto& v : views) {
        intrinsics_for(v);
        if (!ids.insert(v.image_id).second)
            throw ConsistencyError("duplicate image_id " + std::to_string(v.image_id));
        if (!names.insert(v.image_name).second)
            throw ConsistencyError("duplicate image name '" + v.image_name + "'");
    }
}

Mat3 quaternion_to_rotation(double w, double x, double y, double z) {
    double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > 1e-12) || !std::isfinite(n))
        throw ParseError("non-normalizable quaternion");
    return Eigen::Quaterniond(w / n, x / n, y / n, z / n).toRotationMatrix();
}

void pose_to_world_to_camera(const CameraPose& pose, Eigen::Vector4d& q_wxyz, Vec3& t) {
    Mat3 r_wc = pose.rotation.transpose();
    Eigen::Quaterniond q(r_wc);
    if (q.w() < 0) q.coeffs() *= -1;  // canonical sign
    q_wxyz << q.w(), q.x(), q.y(), q.z();
    t = -r_wc * pose.center;
}

std::map<int, PinholeIntrinsics> parse_cameras(std::istream& in) {
    std::map<int, PinholeIntrinsics> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_comment_or_blank(line)) continue;
        auto toks = tokenize(line);
        if (toks.size() < 4)
            throw ParseError("line " + std::to_string(line_no) + ": too few fields in cameras entry");
        PinholeIntrinsics intr;
        intr.camera_id = static_cast<int>(parse_int(toks[0], line_no));
        const std::string& model = toks[1];
        intr.width = static_cast<int>(parse_int(toks[2], line_no));
        intr.height = static_cast<int>(parse_int(toks[3], line_no));
        if (model == "PINHOLE") {
            if (toks.size() != 8)
                throw ParseError("line " + std::to_string(line_no) + ": PINHOLE expects 4 params");
            intr.fx = parse_double(toks[4], line_no);
            intr.fy = parse_double(toks[5], line_no);
            intr.cx = parse_double(toks[6], line_no);
            intr.cy = parse_double(toks[7], line_no);
        } else if (model == "SIMPLE_PINHOLE") {
            if (toks.size() != 7)
                throw ParseError("line " + std::to_string(line_no) + ": SIMPLE_PINHOLE expects 3 params");
            intr.fx = intr.fy = parse_double(toks[4], line_no);
            intr.cx = parse_double(toks[5], line_no);
            intr.cy = parse_double(toks[6], line_no);
        } else {
            throw UnsupportedModel("line " + std::to_string(line_no) + ": unsupported camera model '" +
                                   model + "'");
        }
        intr.validate();
        if (!out.emplace(intr.camera_id, intr).second)
            throw ParseError("line " + std::to_string(line_no) + ": duplicate camera_id " +
                             std::to_string(intr.camera_id));
    }
    return out;
}

std::vector<View> parse_images(std::istream& in) {
    std::vector<View> out;
    std::string line;
    int line_no = 0;
    bool expect_points_line = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (expect_points_line) {
            // observations line (possibly empty), discarded
            expect_points_line = false;
            continue;
        }
        if (is_comment_or_blank(line)) continue;
        auto toks = tokenize(line);
        if (toks.size() < 10)
            throw ParseError("line " + std::to_string(line_no) + ": too few fields in image pose entry");
        View v;
        v.image_id = static_cast<int>(parse_int(toks[0], line_no));
        double qw = parse_double(toks[1], line_no);
        double qx = parse_double(toks[2], line_no);
        double qy = parse_double(toks[3], line_no);
        double qz = parse_double(toks[4], line_no);
        Vec3 t(parse_double(toks[5], line_no), parse_double(toks[6], line_no),
               parse_double(toks[7], line_no));
        v.camera_id = static_cast<int>(parse_int(toks[8], line_no));
        v.image_name = toks[9];
        // stored world-to-camera; internal model is camera-to-world
        Mat3 r_wc = quaternion_to_rotation(qw, qx, qy, qz);
        v.pose.rotation = r_wc.transpose();
        v.pose.center = -(r_wc.transpose() * t);
        out.push_back(std::move(v));
        expect_points_line = true;
    }
    if (expect_points_line)
        throw ParseError("images stream ends with a pose line missing its observations line");
    return out;
}

SparsePointCloud parse_points3d(std::istream& in) {
    SparsePointCloud cloud;
    std::set<std::uint64_t> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_comment_or_blank(line)) continue;
        auto toks = tokenize(line);
        if (toks.size() < 8)
            throw ParseError("line " + std::to_string(line_no) + ": too few fields in points3D entry");
        SparsePoint p;
        p.id = static_cast<std::uint64_t>(parse_int(toks[0], line_no));
        p.position = Vec3(parse_double(toks[1], line_no), parse_double(toks[2], line_no),
                          parse_double(toks[3], line_no));
        p.color = std::array<std::uint8_t, 3>{
            static_cast<std::uint8_t>(parse_int(toks[4], line_no)),
            static_cast<std::uint8_t>(parse_int(toks[5], line_no)),
            static_cast<std::uint8_t>(parse_int(toks[6], line_no))};
        p.error = parse_double(toks[7], line_no);
        if (!seen.insert(p.id).second)
            throw ParseError("line " + std::to_string(line_no) + ": duplicate point id " +
                             std::to_string(p.id));
        cloud.points.push_back(std::move(p));
    }
    return cloud;
}

Reconstruction load_reconstruction(const std::filesystem::path& dir) {
    auto open = [&](const char* name) {
        auto path = dir / name;
        if (!std::filesystem::exists(path))
            throw MissingInput("missing " + path.string());
        return std::ifstream(path);
    };
    Reconstruction recon;
    {
        auto in = open("cameras.txt");
        recon.intrinsics = parse_cameras(in);
    }
    {
        auto in = open("images.txt");
        recon.views = parse_images(in);
    }
    {
        auto in = open("points3D.txt");
        recon.cloud = parse_points3d(in);
    }
    recon.validate();
    return recon;
}

namespace {
void write_num(std::ostream& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    out << buf;
}
}  // namespace

void write_cameras(const std::map<int, PinholeIntrinsics>& cams, std::ostream& out) {
    out << "# Camera list: CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
    for (const auto& [id, c] : cams) {
        out << id << " PINHOLE " << c.width << ' ' << c.height << ' ';
        write_num(out, c.fx); out << ' ';
        write_num(out, c.fy); out << ' ';
        write_num(out, c.cx); out << ' ';
        write_num(out, c.cy); out << '\n';
    }
}

void write_images(const std::vector<View>& views, std::ostream& out) {
    out << "# Image list: IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n";
    for (const auto& v : views) {
        Eigen::Vector4d q;
        Vec3 t;
        pose_to_world_to_camera(v.pose, q, t);
        out << v.image_id;
        for (int i = 0; i < 4; ++i) { out << ' '; write_num(out, q[i]); }
        for (int i = 0; i < 3; ++i) { out << ' '; write_num(out, t[i]); }
        out << ' ' << v.camera_id << ' ' << v.image_name << '\n';
        out << '\n';  // empty observations line
    }
}

void write_points3d(const SparsePointCloud& cloud, std::ostream& out) {
    out << "# 3D point list: POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[]\n";
    for (const auto& p : cloud.points) {
        out << p.id;
        for (int i = 0; i < 3; ++i) { out << ' '; write_num(out, p.position[i]); }
        auto color = p.color.value_or(std::array<std::uint8_t, 3>{128, 128, 128});
        out << ' ' << int(color[0]) << ' ' << int(color[1]) << ' ' << int(color[2]) << ' ';
        write_num(out, p.error.value_or(0.0));
        out << '\n';
    }
}

void save_reconstruction(const Reconstruction& recon, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "cameras.txt");
        write_cameras(recon.intrinsics, out);
    }
    {
        std::ofstream out(dir / "images.txt");
        write_images(recon.views, out);
    }
    {
        std::ofstream out(dir / "points3D.txt");
        write_points3d(recon.cloud, out);
    }
}

}  // namespace birdplan
