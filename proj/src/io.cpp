#include "liipa/io.hpp"

#include <fstream>
#include <sstream>

#include <atomic>

#include <openssl/evp.h>
#include <unistd.h>

namespace liipa {

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::Io, "SHA-256 computation failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[md[i] >> 4]);
        out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    auto tmp = path;
    static std::atomic<unsigned long> counter{0};
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorKind::Io, "cannot rename into " + path.string());
    }
}

ojson to_json(const LabelSet& labels) {
    ojson j;
    for (auto d : kDimensions) j[std::string(to_string(d))] = std::string(to_string(labels.at(d)));
    return j;
}

LabelSet label_set_from_json(const nlohmann::json& j) {
    LabelSet ls;
    for (auto d : kDimensions) {
        const auto key = std::string(to_string(d));
        if (!j.contains(key) || !j[key].is_string())
            throw Error(ErrorKind::Parse, "label set missing '" + key + "'");
        auto lvl = parse_level(j[key].get<std::string>());
        if (!lvl) throw Error(ErrorKind::Parse, "invalid level '" + j[key].get<std::string>() + "'");
        ls.at(d) = *lvl;
    }
    return ls;
}

ojson to_json(const Narrative& n) {
    ojson j;
    j["id"] = n.id;
    j["text"] = n.text;
    j["genre"] = n.constraints.genre;
    j["title"] = n.constraints.title;
    j["length_sentences"] = n.constraints.length_sentences;
    ojson chars = ojson::array();
    for (const auto& c : n.constraints.characters) {
        ojson cj;
        cj["name"] = c.id.str();
        cj["role"] = std::string(to_string(c.role()));
        cj["labels"] = to_json(c.labels);
        chars.push_back(std::move(cj));
    }
    j["characters"] = std::move(chars);
    j["seed"] = n.constraints.seed;
    if (n.persona) {
        ojson p;
        p["descriptor"] = n.persona->descriptor;
        p["character"] = n.persona->character.str();
        j["persona"] = std::move(p);
    }
    return j;
}

Narrative narrative_from_json(const nlohmann::json& j) {
    try {
        Narrative n;
        n.id = j.at("id").get<std::string>();
        n.text = j.at("text").get<std::string>();
        n.constraints.genre = j.at("genre").get<std::string>();
        n.constraints.title = j.at("title").get<std::string>();
        n.constraints.length_sentences = j.at("length_sentences").get<int>();
        n.constraints.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& cj : j.at("characters")) {
            auto id = CharacterId::parse(cj.at("name").get<std::string>());
            if (!id) throw Error(ErrorKind::Parse, "bad character name in record " + n.id);
            auto role = parse_role(cj.at("role").get<std::string>());
            if (!role || *role != id->role)
                throw Error(ErrorKind::Parse, "role/name mismatch in record " + n.id);
            n.constraints.characters.push_back({*id, label_set_from_json(cj.at("labels"))});
        }
        n.constraints.character_count = static_cast<int>(n.constraints.characters.size());
        if (j.contains("persona")) {
            const auto& pj = j["persona"];
            auto id = CharacterId::parse(pj.at("character").get<std::string>());
            if (!id) throw Error(ErrorKind::Parse, "bad persona character in record " + n.id);
            n.persona = PersonaTag{pj.at("descriptor").get<std::string>(), *id};
        }
        return n;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("malformed dataset record: ") + e.what());
    }
}

std::string to_jsonl(const std::vector<Narrative>& dataset) {
    std::string out;
    for (const auto& n : dataset) {
        out += to_json(n).dump();
        out += '\n';
    }
    return out;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<nlohmann::json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::Parse,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<Narrative> read_dataset(const std::filesystem::path& path) {
    std::vector<Narrative> out;
    for (const auto& j : read_jsonl(path)) out.push_back(narrative_from_json(j));
    return out;
}

}  // namespace liipa
