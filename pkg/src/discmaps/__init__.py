# Este arquivo é intencionalmente vazio para marcar o diretório como um pacote Python
